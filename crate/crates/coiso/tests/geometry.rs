//! Algebraic invariants of the form/bracket layer and small synthetic models
//! whose answers are known in closed form.

use std::sync::Arc;

use coiso::connection::{curvature_decomposition, validate, Classification, Connection};
use coiso::embedding::{tubular_radius, CoisotropicEmbedding};
use coiso::geomcore::poly::{PolyForm, Polynomial};
use coiso::geomcore::{exterior_derivative, ChartMap};
use coiso::pca::{primary_constraints, solve_dynamics, stabilization_step, HamiltonianSystem};
use coiso::poisson::{bracket, from_symplectic, invert, jacobi_residual, lift, PoissonStructure};
use coiso::presympl::PreSymplecticStructure;
use coiso::sampling::{rng, uniform_vec};
use coiso::{AltTensor, Bivector, Chart, DiffBackend, KForm, ScalarField};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn alt(dim: usize, degree: usize, comps: Vec<f64>) -> AltTensor {
    AltTensor::from_comps(dim, degree, comps)
}

fn binom(n: usize, k: usize) -> usize {
    coiso::geomcore::binomial(n, k)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wedge_is_graded_commutative_and_associative(
        k in 0usize..3, l in 0usize..3, m in 0usize..2,
        seed in any::<u64>(),
    ) {
        let dim = 6;
        let mut g = rng(seed);
        let a = alt(dim, k, uniform_vec(&mut g, binom(dim, k), -1.0, 1.0));
        let b = alt(dim, l, uniform_vec(&mut g, binom(dim, l), -1.0, 1.0));
        let c = alt(dim, m, uniform_vec(&mut g, binom(dim, m), -1.0, 1.0));
        let sign = if (k * l) % 2 == 0 { 1.0 } else { -1.0 };
        prop_assert!(a.wedge(&b).sub(&b.wedge(&a).scale(sign)).max_abs() < 1e-12);
        prop_assert!(a.wedge(&b).wedge(&c).sub(&a.wedge(&b.wedge(&c))).max_abs() < 1e-12);
    }

    #[test]
    fn interior_product_is_an_antiderivation(seed in any::<u64>()) {
        let dim = 5;
        let mut g = rng(seed);
        let a = AltTensor::from_covector(&DVector::from_vec(uniform_vec(&mut g, dim, -1.0, 1.0)));
        let b = alt(dim, 2, uniform_vec(&mut g, binom(dim, 2), -1.0, 1.0));
        let v = DVector::from_vec(uniform_vec(&mut g, dim, -1.0, 1.0));
        let lhs = a.wedge(&b).interior(&v);
        let rhs = a.interior(&v).wedge(&b).sub(&a.wedge(&b.interior(&v)));
        prop_assert!(lhs.sub(&rhs).max_abs() < 1e-12);
    }

    #[test]
    fn d_squared_vanishes_on_polynomial_forms(degree in 0usize..3, seed in any::<u64>()) {
        let mut g = rng(seed);
        let f = PolyForm::random(&mut g, 4, degree, 3, 4);
        let dd = f.d().d();
        let x = uniform_vec(&mut g, 4, -1.5, 1.5);
        prop_assert!(dd.eval(&x).max_abs() < 1e-9);
    }
}

#[test]
fn central_differences_match_exact_derivatives_on_cubics() {
    let chart = Chart::euclidean(4);
    let mut g = rng(7);
    let fd = DiffBackend::fd_only(1e-5);
    for _ in 0..20 {
        let p = Polynomial::random(&mut g, 4, 4, 6, 3);
        let f = p.to_field(chart.clone());
        let x = uniform_vec(&mut g, 4, -1.0, 1.0);
        let gap = (fd.gradient(&f, &x).unwrap() - p.gradient(&x)).amax();
        assert!(gap < 1e-8, "gradient gap {gap:e}");

        let w = PolyForm::random(&mut g, 4, 1, 3, 3);
        let exact = w.d().eval(&x);
        let w2 = w.clone();
        let plain = KForm::new(chart.clone(), 1, move |y| w2.eval(y));
        let numeric = exterior_derivative(&plain, &fd).unwrap().eval(&x).unwrap();
        assert!(exact.sub(&numeric).max_abs() < 1e-8);
    }
}

/// `(1 + q1^2) dq1^dp1 + dq2^dp2` on `(q1, p1, q2, p2)`: closed, nondegenerate, non-constant.
fn curved_symplectic() -> (Arc<Chart>, KForm) {
    let chart = Chart::new(["q1", "p1", "q2", "p2"]).unwrap();
    let w = KForm::two_form(chart.clone(), |x| {
        let mut m = DMatrix::zeros(4, 4);
        m[(0, 1)] = 1.0 + x[0] * x[0];
        m[(1, 0)] = -m[(0, 1)];
        m[(2, 3)] = 1.0;
        m[(3, 2)] = -1.0;
        Ok(m)
    });
    (chart, w)
}

fn cubic(chart: &Arc<Chart>, g: &mut coiso::sampling::SeededRng) -> ScalarField {
    Polynomial::random(g, 4, 4, 5, 3).to_field(chart.clone())
}

#[test]
fn symplectic_bracket_is_antisymmetric_leibniz_and_jacobi() {
    let (chart, w) = curved_symplectic();
    let p = from_symplectic(&w);
    let fd = DiffBackend::fd_only(1e-5);
    let mut g = rng(3);
    let q1 = ScalarField::coordinate(chart.clone(), 0);
    let p1 = ScalarField::coordinate(chart.clone(), 1);
    let x = [0.7, -0.2, 0.1, 0.4];
    // Lambda = Omega^-1 gives {q1, p1} = -1 / (1 + q1^2) for this orientation.
    let qp = bracket(&p, &q1, &p1, &x, &fd).unwrap();
    assert!((qp + 1.0 / 1.49).abs() < 1e-9, "{{q1,p1}} = {qp}");

    for _ in 0..20 {
        let (f, h, k) = (cubic(&chart, &mut g), cubic(&chart, &mut g), cubic(&chart, &mut g));
        let x = uniform_vec(&mut g, 4, -1.0, 1.0);
        let fh = bracket(&p, &f, &h, &x, &fd).unwrap();
        let hf = bracket(&p, &h, &f, &x, &fd).unwrap();
        assert!((fh + hf).abs() < 1e-10);
        let lhs = bracket(&p, &f, &h.mul(&k), &x, &fd).unwrap();
        let rhs = bracket(&p, &f, &h, &x, &fd).unwrap() * k.eval(&x).unwrap()
            + h.eval(&x).unwrap() * bracket(&p, &f, &k, &x, &fd).unwrap();
        assert!((lhs - rhs).abs() < 1e-8, "Leibniz gap {:e}", (lhs - rhs).abs());
    }

    let triples: Vec<_> = (0..30).map(|_| (cubic(&chart, &mut g), cubic(&chart, &mut g), cubic(&chart, &mut g))).collect();
    let pts: Vec<Vec<f64>> = (0..30).map(|_| uniform_vec(&mut g, 4, -1.0, 1.0)).collect();
    let good = jacobi_residual(&p, &triples, &pts, &DiffBackend::central(1e-4)).unwrap();
    assert!(good < 1e-5, "jacobiator {good:e}");

    // A conformally rescaled bivector is not Poisson.
    let l = p.lambda.clone();
    let bad = PoissonStructure {
        lambda: Bivector::try_new(chart.clone(), move |x| {
            let s = 1.0 + 0.5 * x.iter().map(|v| v * v).sum::<f64>();
            Ok(l.eval(x)? * s)
        }),
        ..p.clone()
    };
    let corrupt = jacobi_residual(&bad, &triples, &pts, &DiffBackend::central(1e-4)).unwrap();
    assert!(corrupt > 1e-2, "corrupted jacobiator {corrupt:e}");
}

#[test]
fn symplectic_base_has_trivial_embedding() {
    let (chart, w) = curved_symplectic();
    let s = PreSymplecticStructure::new(w.clone()).unwrap();
    let c = Connection::new(chart.clone(), 0, |_| Ok(DMatrix::zeros(4, 0)), |_| Ok(DMatrix::zeros(0, 4)));
    let pts: Vec<Vec<f64>> = (0..5).map(|i| vec![0.1 * i as f64, 0.3, -0.2, 0.5]).collect();
    assert_eq!(curvature_decomposition(&c, &pts, None).unwrap().classification, Classification::Closed);
    let e = CoisotropicEmbedding::build(&s, &c, &pts[0]).unwrap();
    assert_eq!((e.r, e.dim()), (0, 4));
    let inv = invert(&e);
    let direct = from_symplectic(&w);
    for x in &pts {
        let gap = (inv.lambda.eval(x).unwrap() - direct.lambda.eval(x).unwrap()).amax();
        assert!(gap < 1e-12);
    }
    assert!(tubular_radius(&e, &pts, 4, 1).unwrap().radius.is_infinite());
}

/// `dx^dy` on `(x, y, t)` with `V = d/dt` and `P = dt + f dx`.
fn twisted(f: fn(&[f64]) -> f64, df: fn(&[f64]) -> [f64; 3]) -> (PreSymplecticStructure, Connection) {
    let chart = Chart::new(["x", "y", "t"]).unwrap();
    let w = KForm::two_form(chart.clone(), |_| {
        let mut m = DMatrix::zeros(3, 3);
        m[(0, 1)] = 1.0;
        m[(1, 0)] = -1.0;
        Ok(m)
    });
    let c = Connection::new(
        chart,
        1,
        |_| Ok(DMatrix::from_column_slice(3, 1, &[0.0, 0.0, 1.0])),
        move |x| Ok(DMatrix::from_row_slice(1, 3, &[f(x), 0.0, 1.0])),
    )
    .with_exact_dforms(move |x| {
        // d(f dx) = df ^ dx
        let g = df(x);
        let mut m = DMatrix::zeros(3, 3);
        for i in 0..3 {
            m[(i, 0)] += g[i];
            m[(0, i)] -= g[i];
        }
        Ok(vec![m])
    });
    (PreSymplecticStructure::new(w).unwrap(), c)
}

#[test]
fn flat_but_not_closed_connection_is_classified_flat() {
    // f = t: dP = dt^dx vanishes on horizontal pairs.
    let (s, c) = twisted(|x| x[2], |_| [0.0, 0.0, 1.0]);
    let pts: Vec<Vec<f64>> = (0..6).map(|i| vec![0.2 * i as f64, -0.1, 0.3 * i as f64 - 0.5]).collect();
    // In rank one i_V dP = L_V P, so a flat connection that is not closed
    // cannot be invariant. Classification does not depend on that.
    let v = validate(&c, &s, &pts, 1e-8).unwrap();
    assert!(!v.pass && v.invariance > 0.1 && v.kernel_membership < 1e-12);
    let rep = curvature_decomposition(&c, &pts, None).unwrap();
    assert_eq!(rep.classification, Classification::Flat);
    assert!(rep.max_dp() > 0.5 && rep.max_dhp() < 1e-10);
}

#[test]
fn curved_toy_connection_has_finite_tubular_radius() {
    // f = y: Omega = (1 - mu) dx^dy + dmu^dt + y dmu^dx, degenerate exactly at mu = 1.
    let (s, c) = twisted(|x| x[1], |_| [0.0, 1.0, 0.0]);
    let pts: Vec<Vec<f64>> = (0..6).map(|i| vec![0.2 * i as f64, 0.4 - 0.1 * i as f64, 0.1]).collect();
    assert_eq!(curvature_decomposition(&c, &pts, None).unwrap().classification, Classification::Curved);
    let e = CoisotropicEmbedding::build(&s, &c, &pts[0]).unwrap();
    for x in &pts {
        // mu-affinity of Omega.
        let (a, b, m) = (e.omega_at(&e.with_mu(x, &[-0.3])).unwrap(), e.omega_at(&e.with_mu(x, &[0.7])).unwrap(), e.omega_at(&e.with_mu(x, &[0.2])).unwrap());
        assert!((a + b - m * 2.0).amax() < 1e-12);
        let half = e.omega_at(&e.with_mu(x, &[0.5])).unwrap().determinant();
        assert!((half - 0.25).abs() < 1e-12, "det {half}");
    }
    let radius = tubular_radius(&e, &pts, 8, 2).unwrap().radius;
    assert!(radius.is_finite() && radius <= 1.0 && radius > 0.5, "radius {radius}");
}

fn pca_chain() -> (HamiltonianSystem, Arc<Chart>) {
    // dx^dy on (x, y, u, w) with H = u y + x^2 / 2.
    let chart = Chart::new(["x", "y", "u", "w"]).unwrap();
    let w = KForm::two_form(chart.clone(), |_| {
        let mut m = DMatrix::zeros(4, 4);
        m[(0, 1)] = 1.0;
        m[(1, 0)] = -1.0;
        Ok(m)
    });
    let h = ScalarField::new(chart.clone(), |x| x[2] * x[1] + 0.5 * x[0] * x[0])
        .with_gradient(|x| DVector::from_vec(vec![x[0], x[2], x[1], 0.0]));
    (HamiltonianSystem::new(PreSymplecticStructure::new(w).unwrap(), h).unwrap(), chart)
}

#[test]
fn constraint_algorithm_runs_two_steps_on_toy_model() {
    let (sys, chart) = pca_chain();
    let backend = DiffBackend::default();
    let mut g = rng(5);
    let pts: Vec<Vec<f64>> = (0..12).map(|_| uniform_vec(&mut g, 4, -1.0, 1.0)).collect();
    let primary = primary_constraints(&sys, &pts, &backend, 1e-8).unwrap();
    let labels: Vec<&str> = primary.constraints.iter().map(|c| c.label.as_str()).collect();
    assert_eq!(labels, ["u", "w"]);
    assert_eq!((primary.count(), primary.stacked_rank), (1, 1));
    for (v, x) in primary.row("u").unwrap().values.iter().zip(&pts) {
        assert!((v - x[1]).abs() < 1e-12);
    }

    // Surface y = 0: omega pulls back to zero and x^2/2 survives.
    let s1 = Chart::new(["x", "u", "w"]).unwrap();
    let p1 = ChartMap::new(s1.clone(), chart.clone(), |z| Ok(DVector::from_vec(vec![z[0], 0.0, z[1], z[2]])));
    let on1: Vec<Vec<f64>> = (0..12).map(|_| uniform_vec(&mut g, 3, -1.0, 1.0)).collect();
    let (secondary, sys1) = stabilization_step(&sys, &primary, &p1, &on1, &backend, 1e-8).unwrap();
    assert_eq!((secondary.iterations, secondary.count(), secondary.stabilized), (1, 1, false));
    let want = on1.iter().fold(0.0f64, |a, z| a.max(z[0].abs()));
    assert!((secondary.row("x").unwrap().max_abs - want).abs() < 1e-8);

    // Surface x = y = 0: nothing left to constrain.
    let s2 = Chart::new(["u", "w"]).unwrap();
    let p2 = ChartMap::new(s2, s1, |z| Ok(DVector::from_vec(vec![0.0, z[0], z[1]])));
    let on2: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 - 2.5, 0.5]).collect();
    let (tertiary, _) = stabilization_step(&sys1, &secondary, &p2, &on2, &backend, 1e-8).unwrap();
    assert_eq!((tertiary.iterations, tertiary.stabilized), (2, true));

    // A surface off the primary constraint set is refused.
    let off = ChartMap::new(Chart::new(["x", "u", "w"]).unwrap(), chart, |z| {
        Ok(DVector::from_vec(vec![z[0], 0.3, z[1], z[2]]))
    });
    assert!(stabilization_step(&sys, &primary, &off, &on1, &backend, 1e-8).is_err());
}

#[test]
fn dependent_constraints_have_stacked_rank_one() {
    let chart = Chart::new(["x", "y"]).unwrap();
    let w = KForm::zero(chart.clone(), 2);
    let h = ScalarField::new(chart, |x| (x[0] + x[1]).sin());
    let sys = HamiltonianSystem::new(PreSymplecticStructure::new(w).unwrap(), h).unwrap();
    let pts: Vec<Vec<f64>> = (0..8).map(|i| vec![0.1 * i as f64, 0.2]).collect();
    let rep = primary_constraints(&sys, &pts, &DiffBackend::default(), 1e-8).unwrap();
    assert_eq!((rep.count(), rep.stacked_rank), (2, 1));
}

#[test]
fn free_radial_motion_is_linear_and_mu_is_conserved() {
    let b = coiso::models::monopole::build_monopole(1.0, true).unwrap();
    let x0 = [1.0, 0.5, 0.3, -0.2, 0.4, 0.0, 0.0];
    let e = CoisotropicEmbedding::build(&b.structure, &b.connection, &x0).unwrap();
    let lam = invert(&e).lambda;
    let h = lift(&b.system.unwrap().h, &e);
    let z0 = e.with_mu(&x0, &[0.25]);
    let traj = solve_dynamics(&lam, &h, &z0, 2.0, 1e-3, &DiffBackend::default()).unwrap();
    for (t, z) in traj.times.iter().zip(&traj.states) {
        assert!((z[0] - (1.0 + 0.5 * t)).abs() < 1e-9, "r({t}) = {}", z[0]);
        assert!((z[1] - 0.5).abs() < 1e-9);
        assert!((z[7] - 0.25).abs() < 1e-12);
        // Zero angular momentum leaves the group coordinates at rest.
        assert!((z[2] - 0.3).abs() + (z[3] + 0.2).abs() + (z[4] - 0.4).abs() < 1e-9);
    }
    assert!(traj.max_drift() < 1e-12);
}
