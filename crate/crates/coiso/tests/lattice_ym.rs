use coiso::connection::{curvature_decomposition, validate, Classification};
use coiso::embedding::{certify_closed, certify_coisotropic, closedness_residual, CoisotropicEmbedding};
use coiso::geomcore::pullback_form;
use coiso::models::ed::build_lattice_ed;
use coiso::models::lattice::{Grid, Group};
use coiso::models::ym::{build_lattice_ym, gauge_kernel_field, YmBuild};
use coiso::pca::{primary_constraints, stabilization_step};
use coiso::poisson::invert;
use coiso::presympl::kernel_basis;
use coiso::sampling::{gaussian_vec, rng, uniform};
use coiso::DiffBackend;
use nalgebra::DVector;
use std::sync::OnceLock;

fn su2() -> &'static YmBuild {
    static B: OnceLock<YmBuild> = OnceLock::new();
    B.get_or_init(|| build_lattice_ym(Grid::new([2, 2, 2]).unwrap(), Group::Su2, 11).unwrap())
}

#[test]
fn dimensions_and_kernel() {
    let b = su2();
    assert_eq!(b.model.na(), 72);
    assert_eq!(b.model.m(), 48);
    assert_eq!(b.model.r(), 24);
    for x in b.model.sample_points(3, 1) {
        assert_eq!(kernel_basis(&b.structure, &x).unwrap().corank(), 24);
        assert!(b.model.gauss_residual(&x).unwrap() < 1e-9);
    }
}

#[test]
fn dp_dc_matrix_matches_differences() {
    let b = su2();
    let x = b.model.sample_points(1, 2).remove(0);
    let pt = b.model.point(&x).unwrap();
    let bm = b.model.b_matrix(&x, &pt);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for i in (0..72).step_by(5) {
        let mut y = x.clone();
        y[i] += h;
        let pp = b.model.point(&y).unwrap().p;
        y[i] -= 2.0 * h;
        let pm = b.model.point(&y).unwrap().p;
        worst = worst.max(((pp - pm) / (2.0 * h) - bm.column(i)).amax());
    }
    assert!(worst < 1e-8, "{worst}");
}

#[test]
fn omega_is_pullback_of_slice_form_and_closed() {
    let b = su2();
    let pulled = pullback_form(&b.system.structure.omega, &b.param).unwrap();
    let pts = b.model.sample_points(4, 3);
    for x in &pts {
        let d = b.structure.omega.eval_matrix(x).unwrap() - pulled.eval_matrix(x).unwrap();
        assert!(d.amax() < 1e-12, "{}", d.amax());
    }
    let r = closedness_residual(&b.structure.omega, &pts, 1e-4, 1).unwrap();
    assert!(r.residual < 1e-6, "{}", r.residual);
}

#[test]
fn gauge_field_is_tangent_and_in_kernel() {
    let b = su2();
    let x = b.model.sample_points(1, 4).remove(0);
    let psi = DVector::from_vec(gaussian_vec(&mut rng(5), b.model.ns()));
    let v = gauge_kernel_field(&b.model, &psi).eval(&x).unwrap();
    let om = b.structure.omega.eval_matrix(&x).unwrap();
    assert!((om * &v).amax() < 1e-9 * v.amax());
    // Linearized Gauss law along (X_a, X_p) in slice variables.
    let na = b.model.na();
    let pt = b.model.point(&x).unwrap();
    let (xa, xp) = b.model.gauge_direction(&x[..na], &pt.p, &psi);
    let h = 1e-6;
    let gauss = |s: f64| {
        let a: Vec<f64> = x[..na].iter().zip(xa.iter()).map(|(a, d)| a + s * d).collect();
        b.model.ops.apply_adjoint(&a, &(&pt.p + &xp * s))
    };
    assert!(((gauss(h) - gauss(-h)) / (2.0 * h)).amax() < 1e-7);
    assert!(gauge_kernel_field(&b.model, &DVector::zeros(b.model.ns())).eval(&x).unwrap().amax() == 0.0);
}

#[test]
fn coulomb_connection_is_curved_and_exact_dp_matches() {
    let b = su2();
    let pts = b.model.sample_points(3, 6);
    let val = validate(&b.connection, &b.structure, &pts, 1e-8).unwrap();
    assert!(val.pass, "{val:?}");
    let exact = b.connection.dp_at(&pts[0]).unwrap();
    let fd = b.connection.clone().with_backend(DiffBackend::fd_only(1e-5)).dp_at(&pts[0]).unwrap();
    let worst = exact.iter().zip(&fd).map(|(a, b)| (a - b).amax()).fold(0.0, f64::max);
    assert!(worst < 1e-7, "{worst}");
    let cls = curvature_decomposition(&b.connection, &pts, None).unwrap();
    assert_eq!(cls.classification, Classification::Curved, "{cls:?}");
}

#[test]
fn embedding_certificates() {
    let b = su2();
    let pts = b.model.sample_points(3, 7);
    let e = CoisotropicEmbedding::build(&b.structure, &b.connection, &pts[0]).unwrap();
    let mut g = rng(8);
    let zs: Vec<Vec<f64>> =
        pts.iter().map(|x| e.with_mu(x, &(0..24).map(|_| uniform(&mut g, -0.5, 0.5)).collect::<Vec<_>>())).collect();
    let cr = certify_closed(&e, &zs).unwrap();
    assert!(cr.residual < 1e-4, "{}", cr.residual);
    let p = invert(&e);
    let co = certify_coisotropic(&e, &p.lambda, &pts, 1e-6).unwrap();
    assert!(co.pass, "{co:?}");
}

#[test]
fn gauss_law_and_beta_relation_are_the_primary_constraints() {
    let b = su2();
    let pts = b.model.sample_full_points(5, 9);
    let fd = DiffBackend::default();
    let rep = primary_constraints(&b.system, &pts, &fd, 1e-8).unwrap();
    assert_eq!(rep.constraints.len(), 24 + 72);
    let [_, oa, op, ob] = b.model.offsets();
    let na = b.model.na();
    let mut worst = 0.0f64;
    for (i, z) in pts.iter().enumerate() {
        let a = &z[oa..oa + na];
        let p = DVector::from_column_slice(&z[op..op + na]);
        let div = b.model.ops.gradient_matrix(a).transpose() * &p;
        let f = b.model.ops.field_strength(a);
        for (k, row) in rep.constraints.iter().enumerate() {
            let want = if k < 24 {
                assert!(row.label.starts_with("a0("));
                div[k]
            } else {
                assert!(row.label.starts_with("beta("));
                z[ob + k - 24] + f[k - 24]
            };
            worst = worst.max((row.values[i] - want).abs());
        }
    }
    assert!(worst < 1e-9, "{worst}");
    assert!(!rep.stabilized);
    let surf = b.model.sample_points(3, 10);
    let (next, _) = stabilization_step(&b.system, &rep, &b.param, &surf, &fd, 1e-6).unwrap();
    assert!(next.stabilized, "{:?}", next.active().map(|c| c.max_abs).collect::<Vec<_>>());
    assert_eq!(next.iterations, 1);
}

#[test]
fn abelian_limit_equals_electrodynamics() {
    let grid = Grid::new([2, 2, 3]).unwrap();
    let ym = build_lattice_ym(grid, Group::U1, 1).unwrap();
    let ed = build_lattice_ed(grid).unwrap();
    assert_eq!(ym.model.dim(), ed.model.dim());
    for x in ed.model.sample_points(3, 2) {
        let d = ym.structure.omega.eval_matrix(&x).unwrap() - ed.structure.omega.eval_matrix(&x).unwrap();
        assert!(d.amax() < 1e-12);
        let d = ym.connection.projector_at(&x).unwrap() - ed.connection.projector_at(&x).unwrap();
        assert!(d.amax() < 1e-12);
    }
    let pts = ed.model.sample_points(3, 3);
    let cls = curvature_decomposition(&ym.connection, &pts, None).unwrap();
    assert_eq!(cls.classification, Classification::Closed);
}
