//! Magnetic monopole on `T*R+ x N`, `N` the level set `alpha_3 = n` of the
//! left-trivialized `T*SU(2)`.
//!
//! Base coordinates: `(r, p_r)` when the radial factor is present, then
//! exponential coordinates `s` and the momenta `alpha_1, alpha_2`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Vector3};

use super::su2::{left_mc, left_mc_inverse, maurer_cartan_self_test, rotation, McSelfTest, CHART_RADIUS};
use crate::connection::Connection;
use crate::geomcore::{Chart, KForm, ScalarField};
use crate::obs::Registry;
use crate::pca::HamiltonianSystem;
use crate::presympl::PreSymplecticStructure;
use crate::sampling::{ball, rng, uniform};
use crate::Result;

#[derive(Debug, Clone)]
pub struct MonopoleModel {
    pub n: f64,
    pub radial: bool,
    pub chart: Arc<Chart>,
    /// Sign in `d theta^3 = sign * theta^1 ^ theta^2`, from the self-test.
    pub mc: McSelfTest,
}

pub struct MonopoleBuild {
    pub model: MonopoleModel,
    pub structure: PreSymplecticStructure,
    pub connection: Connection,
    /// Present when the radial factor is included.
    pub system: Option<HamiltonianSystem>,
    pub observables: Registry,
}

fn wedge_mat(a: &DVector<f64>, b: &DVector<f64>) -> DMatrix<f64> {
    a * b.transpose() - b * a.transpose()
}

impl MonopoleModel {
    pub fn dim(&self) -> usize {
        self.offset() + 5
    }

    pub fn offset(&self) -> usize {
        if self.radial {
            2
        } else {
            0
        }
    }

    pub fn s_of(&self, x: &[f64]) -> Vector3<f64> {
        let o = self.offset();
        Vector3::new(x[o], x[o + 1], x[o + 2])
    }

    fn alphas(&self, x: &[f64]) -> (f64, f64) {
        let o = self.offset();
        (x[o + 3], x[o + 4])
    }

    /// The three `theta^j` as covectors on the chart.
    pub fn thetas(&self, x: &[f64]) -> [DVector<f64>; 3] {
        let t = left_mc(&self.s_of(x));
        let o = self.offset();
        std::array::from_fn(|j| {
            let mut v = DVector::zeros(self.dim());
            for i in 0..3 {
                v[o + i] = t[(j, i)];
            }
            v
        })
    }

    pub fn omega_matrix(&self, x: &[f64]) -> DMatrix<f64> {
        let o = self.offset();
        let dim = self.dim();
        let th = self.thetas(x);
        let (a1, a2) = self.alphas(x);
        let e = |i: usize| {
            let mut v = DVector::zeros(dim);
            v[i] = 1.0;
            v
        };
        let mut m = wedge_mat(&(e(o + 3) - &th[2] * a2), &th[0]) + wedge_mat(&(e(o + 4) + &th[2] * a1), &th[1])
            - wedge_mat(&th[0], &th[1]) * self.n;
        if self.radial {
            m += wedge_mat(&e(1), &e(0));
        }
        m
    }

    /// `V = -X3bar^up`: minus the lifted left-invariant field, rotating `(alpha_1, alpha_2)`.
    pub fn vertical(&self, x: &[f64]) -> DVector<f64> {
        let o = self.offset();
        let x3 = left_mc_inverse(&self.s_of(x)).column(2).into_owned();
        let (a1, a2) = self.alphas(x);
        let mut v = DVector::zeros(self.dim());
        for i in 0..3 {
            v[o + i] = -x3[i];
        }
        v[o + 3] = -a2;
        v[o + 4] = a1;
        v
    }

    /// `J_k = alpha_1 R_k1 + alpha_2 R_k2 + n R_k3` with `R = Ad_g`.
    pub fn j_value(&self, x: &[f64], k: usize) -> f64 {
        let r = rotation(&self.s_of(x));
        let (a1, a2) = self.alphas(x);
        a1 * r[(k, 0)] + a2 * r[(k, 1)] + self.n * r[(k, 2)]
    }

    /// Gradient of `v . (Ad_g w)` in `s`, using `dR = R hat(theta ds)`.
    fn ad_gradient_s(&self, x: &[f64], k: usize, w: &Vector3<f64>) -> Vector3<f64> {
        let s = self.s_of(x);
        let r = rotation(&s);
        let t = left_mc(&s);
        Vector3::from_fn(|i, _| {
            let col: Vector3<f64> = t.column(i).into_owned();
            (r * super::su2::hat(&col) * w)[k]
        })
    }

    fn j_gradient(&self, x: &[f64], k: usize) -> DVector<f64> {
        let o = self.offset();
        let (a1, a2) = self.alphas(x);
        let w = Vector3::new(a1, a2, self.n);
        let gs = self.ad_gradient_s(x, k, &w);
        let r = rotation(&self.s_of(x));
        let mut g = DVector::zeros(self.dim());
        for i in 0..3 {
            g[o + i] = gs[i];
        }
        g[o + 3] = r[(k, 0)];
        g[o + 4] = r[(k, 1)];
        g
    }

    /// `theta_3^k = theta^3(Y_k) = R_k3`.
    pub fn theta3_value(&self, x: &[f64], k: usize) -> f64 {
        rotation(&self.s_of(x))[(k, 2)]
    }

    fn theta3_gradient(&self, x: &[f64], k: usize) -> DVector<f64> {
        let o = self.offset();
        let gs = self.ad_gradient_s(x, k, &Vector3::new(0.0, 0.0, 1.0));
        let mut g = DVector::zeros(self.dim());
        for i in 0..3 {
            g[o + i] = gs[i];
        }
        g
    }

    pub fn hamiltonian(&self, x: &[f64]) -> f64 {
        let (a1, a2) = self.alphas(x);
        0.5 * (x[1] * x[1] + (a1 * a1 + a2 * a2) / (x[0] * x[0]))
    }

    fn hamiltonian_gradient(&self, x: &[f64]) -> DVector<f64> {
        let (r, pr) = (x[0], x[1]);
        let (a1, a2) = self.alphas(x);
        let mut g = DVector::zeros(self.dim());
        g[0] = -(a1 * a1 + a2 * a2) / (r * r * r);
        g[1] = pr;
        g[5] = a1 / (r * r);
        g[6] = a2 / (r * r);
        g
    }

    /// Seeded base points: `|s| <= 2.5`, `|alpha| <= 1`, `r in [0.5, 2]`, `|p_r| <= 1`.
    pub fn sample_points(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut g = rng(seed);
        (0..count)
            .map(|_| {
                let mut x = Vec::with_capacity(self.dim());
                if self.radial {
                    x.push(uniform(&mut g, 0.5, 2.0));
                    x.push(uniform(&mut g, -1.0, 1.0));
                }
                x.extend(ball(&mut g, 3, 2.5));
                x.push(uniform(&mut g, -1.0, 1.0));
                x.push(uniform(&mut g, -1.0, 1.0));
                x
            })
            .collect()
    }
}

fn self_test_points() -> Vec<Vector3<f64>> {
    vec![Vector3::new(0.3, -0.5, 0.7), Vector3::new(-1.1, 0.4, 0.9), Vector3::new(0.05, 1.6, -0.8)]
}

pub fn build_monopole(n: f64, radial: bool) -> Result<MonopoleBuild> {
    let mut names: Vec<&str> = Vec::new();
    if radial {
        names.extend(["r", "pr"]);
    }
    names.extend(["s1", "s2", "s3", "alpha1", "alpha2"]);
    let o = if radial { 2 } else { 0 };
    let chart = Chart::with_domain(
        names,
        Arc::new(move |x: &[f64]| {
            let s2 = x[o] * x[o] + x[o + 1] * x[o + 1] + x[o + 2] * x[o + 2];
            s2.sqrt() < CHART_RADIUS && (!radial || x[0] > 0.0)
        }),
    )?;
    let model = MonopoleModel { n, radial, chart: chart.clone(), mc: maurer_cartan_self_test(&self_test_points()) };

    let m1 = model.clone();
    let omega = KForm::two_form(chart.clone(), move |x| Ok(m1.omega_matrix(x))).with_exact_d(KForm::zero(chart.clone(), 3));
    let structure = PreSymplecticStructure::new(omega)?;

    let (m2, m3, m4) = (model.clone(), model.clone(), model.clone());
    let sign = model.mc.sign;
    let dim = model.dim();
    let connection = Connection::new(
        chart.clone(),
        1,
        move |x| Ok(DMatrix::from_column_slice(dim, 1, m2.vertical(x).as_slice())),
        move |x| Ok(DMatrix::from_row_slice(1, dim, (-&m3.thetas(x)[2]).as_slice())),
    )
    .with_exact_dforms(move |x| {
        // dP = -d theta^3 = -sign theta^1 ^ theta^2
        let th = m4.thetas(x);
        Ok(vec![wedge_mat(&th[0], &th[1]) * (-sign)])
    });

    let mut observables = Registry::new();
    for k in 0..3 {
        let (a, b) = (model.clone(), model.clone());
        observables.insert(
            format!("J{}", k + 1),
            ScalarField::new(chart.clone(), move |x| a.j_value(x, k)).with_gradient(move |x| b.j_gradient(x, k)),
        )?;
        let (a, b) = (model.clone(), model.clone());
        observables.insert(
            format!("theta3_{}", k + 1),
            ScalarField::new(chart.clone(), move |x| a.theta3_value(x, k))
                .with_gradient(move |x| b.theta3_gradient(x, k)),
        )?;
    }
    let system = if radial {
        let (a, b) = (model.clone(), model.clone());
        let h = ScalarField::new(chart.clone(), move |x| a.hamiltonian(x))
            .with_gradient(move |x| b.hamiltonian_gradient(x));
        observables.insert("H", h.clone())?;
        Some(HamiltonianSystem::new(structure.clone(), h)?)
    } else {
        None
    };
    Ok(MonopoleBuild { model, structure, connection, system, observables })
}
