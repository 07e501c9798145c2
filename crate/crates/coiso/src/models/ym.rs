//! Yang-Mills on a periodic lattice with group-valued links.
//!
//! Two charts are built:
//! * the full slice chart `(a0, a, p, beta)` carrying the canonical
//!   `omega = sum dp ^ da` and the Hamiltonian, used for the constraint algorithm;
//! * the Gauss-law surface chart `(a, c)` with `p = Pi(a) Q0 c`, where
//!   `Pi(a) = 1 - grad Delta^+ grad^T` and `Q0` spans `ker grad^T(a_ref)`,
//!   carrying the pre-symplectic form and the Coulomb connection.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::lattice::{link_names, plaquette_names, site_names, GreenSolver, Grid, Group, LatticeOps};
use crate::connection::Connection;
use crate::geomcore::{AltTensor, Chart, ChartMap, KForm, ScalarField, VectorField};
use crate::linalg::{null_space, range_basis};
use crate::obs::Registry;
use crate::pca::HamiltonianSystem;
use crate::presympl::PreSymplecticStructure;
use crate::sampling::{rng, uniform_vec};
use crate::{Error, Result};

/// Step of the five-point stencil used for `dF/da`.
const F_STEP: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct YmModel {
    pub ops: LatticeOps,
    /// Gauss-surface chart `(a, c)`.
    pub chart: Arc<Chart>,
    /// Slice chart `(a0, a, p, beta)`.
    pub full_chart: Arc<Chart>,
    pub a_ref: Vec<f64>,
    /// Orthonormal basis of `ker grad^T(a_ref)` (`na x m`).
    pub q0: DMatrix<f64>,
    /// Orthonormal gauge parameters orthogonal to the zero modes (`ns x r`).
    pub psi: DMatrix<f64>,
    plaquettes_of_link: Arc<Vec<Vec<usize>>>,
}

/// Everything at one surface point that the forms and frames share.
#[derive(Debug, Clone)]
pub struct YmPoint {
    pub nabla: DMatrix<f64>,
    pub green: GreenSolver,
    /// `M = Delta^+ grad^T` (`ns x na`).
    pub m: DMatrix<f64>,
    /// `Pi = 1 - grad M`.
    pub pi: DMatrix<f64>,
    /// `C = Pi Q0 = dp/dc`.
    pub c: DMatrix<f64>,
    pub p: DVector<f64>,
    /// `w = M Q0 c`.
    pub w: DVector<f64>,
    /// Killing metric blocks `theta_l^T theta_l` per link.
    pub metric: Vec<DMatrix<f64>>,
    /// Covariant Laplacian `grad^T g grad` and its Green solver.
    pub green_g: GreenSolver,
    /// Coulomb operator `M_g = G_g grad^T g` (`ns x na`).
    pub mg: DMatrix<f64>,
    /// `Pi_g = 1 - grad M_g`.
    pub pig: DMatrix<f64>,
}

pub struct YmBuild {
    pub model: YmModel,
    pub structure: PreSymplecticStructure,
    pub connection: Connection,
    /// Slice system `(a0, a, p, beta)` with the lattice Hamiltonian.
    pub system: HamiltonianSystem,
    /// Gauss surface (with `a0 = 0`, `beta = -F`) into the slice chart.
    pub param: ChartMap,
    pub observables: Registry,
}

impl YmModel {
    pub fn na(&self) -> usize {
        self.ops.na()
    }

    pub fn ns(&self) -> usize {
        self.ops.ns()
    }

    pub fn m(&self) -> usize {
        self.q0.ncols()
    }

    pub fn r(&self) -> usize {
        self.psi.ncols()
    }

    pub fn dim(&self) -> usize {
        self.na() + self.m()
    }

    pub fn full_dim(&self) -> usize {
        self.ns() + 3 * self.na()
    }

    pub fn point(&self, x: &[f64]) -> Result<YmPoint> {
        let (na, g) = (self.na(), self.ops.group);
        let a = &x[..na];
        let nabla = self.ops.gradient_matrix(a);
        let green = GreenSolver::new(&(nabla.transpose() * &nabla), g.generic_zero_modes())?;
        let m = &green.pinv * nabla.transpose();
        let pi = DMatrix::identity(na, na) - &nabla * &m;
        let c = &pi * &self.q0;
        let v = &self.q0 * DVector::from_column_slice(&x[na..]);
        let p = &pi * &v;
        let w = &m * &v;
        let metric: Vec<DMatrix<f64>> = (0..self.ops.grid.links())
            .map(|l| {
                let th = g.link_frame(self.ops.link(a, l));
                th.transpose() * th
            })
            .collect();
        let gd = self.ops.g();
        let mut gmat = DMatrix::zeros(na, na);
        for (l, blk) in metric.iter().enumerate() {
            gmat.view_mut((l * gd, l * gd), (gd, gd)).copy_from(blk);
        }
        let bt = nabla.transpose() * &gmat;
        let green_g = GreenSolver::new(&(&bt * &nabla), g.generic_zero_modes())?;
        let mg = &green_g.pinv * &bt;
        let pig = DMatrix::identity(na, na) - &nabla * &mg;
        Ok(YmPoint { nabla, green, m, pi, c, p, w, metric, green_g, mg, pig })
    }

    /// `B = dp/da` (`na x na`).
    pub fn b_matrix(&self, x: &[f64], pt: &YmPoint) -> DMatrix<f64> {
        let (na, g) = (self.na(), self.ops.g());
        let a = &x[..na];
        let ng = &pt.nabla * &pt.green.pinv;
        let mut b = DMatrix::zeros(na, na);
        for i in 0..na {
            let l = i / g;
            let u = self.ops.dgradient_apply(a, i, &pt.w);
            let pl = pt.p.rows(l * g, g).into_owned();
            let col = -(pt.pi.columns(l * g, g) * u) - &ng * self.ops.dgradient_adjoint(a, i, &pl);
            b.set_column(i, &col);
        }
        b
    }

    pub fn omega_matrix(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let pt = self.point(x)?;
        let b = self.b_matrix(x, &pt);
        let (na, m) = (self.na(), self.m());
        let mut om = DMatrix::zeros(na + m, na + m);
        om.view_mut((0, 0), (na, na)).copy_from(&(b.transpose() - &b));
        om.view_mut((0, na), (na, m)).copy_from(&(-&pt.c));
        om.view_mut((na, 0), (m, na)).copy_from(&pt.c.transpose());
        Ok(om)
    }

    /// `X_p(psi)_i = -p . (d grad / d a_i) psi`, the cotangent lift of the gauge action.
    fn gauge_momentum(&self, a: &[f64], p: &DVector<f64>, psi: &DVector<f64>) -> DVector<f64> {
        let g = self.ops.g();
        DVector::from_fn(self.na(), |i, _| {
            let l = i / g;
            -p.rows(l * g, g).dot(&self.ops.dgradient_apply(a, i, psi))
        })
    }

    /// Gauge direction in slice variables: `(grad psi, X_p)`.
    pub fn gauge_direction(&self, a: &[f64], p: &DVector<f64>, psi: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        (self.ops.apply_gradient(a, psi), self.gauge_momentum(a, p, psi))
    }

    /// Gauge directions for the columns of `psis`, in surface coordinates.
    pub fn gauge_frame(&self, x: &[f64], pt: &YmPoint, b: &DMatrix<f64>, psis: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let (na, m) = (self.na(), self.m());
        let a = &x[..na];
        let ctc = pt.c.transpose() * &pt.c;
        let chol = ctc.cholesky().ok_or_else(|| Error::Rank("momentum chart degenerate".into()))?;
        let mut out = DMatrix::zeros(na + m, psis.ncols());
        for j in 0..psis.ncols() {
            let psi = psis.column(j).into_owned();
            let (xa, xp) = self.gauge_direction(a, &pt.p, &psi);
            let dc = chol.solve(&(pt.c.transpose() * (xp - b * &xa)));
            out.view_mut((0, j), (na, 1)).copy_from(&xa);
            out.view_mut((na, j), (m, 1)).copy_from(&dc);
        }
        Ok(out)
    }

    /// Coulomb connection forms `psi^T G_g grad^T g`, zero on `c`.
    pub fn forms_matrix(&self, pt: &YmPoint) -> DMatrix<f64> {
        let (na, r) = (self.na(), self.r());
        let mut f = DMatrix::zeros(r, self.dim());
        f.view_mut((0, 0), (r, na)).copy_from(&(self.psi.transpose() * &pt.mg));
        f
    }

    /// Exact `dP^j` from `d M_g / d a_i = G_g dB_i Pi_g - M_g dgrad_i M_g`
    /// with `B = grad^T g`.
    pub fn dforms(&self, x: &[f64], pt: &YmPoint) -> Vec<DMatrix<f64>> {
        let (na, n, r, g) = (self.na(), self.dim(), self.r(), self.ops.g());
        let mut out = vec![DMatrix::zeros(n, n); r];
        if self.ops.group == Group::U1 {
            return out;
        }
        let a = &x[..na];
        let pg = self.psi.transpose() * &pt.green_g.pinv;
        let pm = self.psi.transpose() * &pt.mg;
        let mut d = Vec::with_capacity(na);
        for i in 0..na {
            let (l, b) = (i / g, i % g);
            let (tail, head) = self.ops.grid.link_ends(l);
            let link = self.ops.link(a, l);
            let blk = self.ops.group.link_block(link);
            let da = self.ops.group.link_block_derivative(link, b);
            // theta = A^{-1}, so d theta = -theta dA theta.
            let th = self.ops.group.link_frame(link);
            let dth = -(&th * &da * &th);
            let dg = dth.transpose() * &th + th.transpose() * &dth;
            let pig_l = pt.pig.rows(l * g, g);
            let gpl = &pt.metric[l] * pig_l;
            let grad_l = pg.columns(head * g, g) * blk.transpose() - pg.columns(tail * g, g) * &blk;
            let t1 = pg.columns(head * g, g) * da.transpose() * &gpl - pg.columns(tail * g, g) * &da * &gpl
                + grad_l * dg * pig_l;
            let dm = &da * pt.mg.rows(head * g, g) - da.transpose() * pt.mg.rows(tail * g, g);
            let t2 = pm.columns(l * g, g) * dm;
            d.push(t1 - t2);
        }
        for (j, dp) in out.iter_mut().enumerate() {
            for i in 0..na {
                for k in 0..na {
                    dp[(i, k)] = d[i][(j, k)] - d[k][(j, i)];
                }
            }
        }
        out
    }

    /// `dF/da` (`na x na`) by five-point differences, plaquette-local.
    pub fn field_strength_jacobian(&self, a: &[f64]) -> DMatrix<f64> {
        let (na, g) = (self.na(), self.ops.g());
        let mut jac = DMatrix::zeros(na, na);
        let mut y = a.to_vec();
        for i in 0..na {
            for &q in &self.plaquettes_of_link[i / g] {
                let mut at = |s: f64| {
                    y[i] = a[i] + s * F_STEP;
                    let v = self.ops.plaquette_strength(&y, q);
                    y[i] = a[i];
                    v
                };
                let d = (at(-2.0) - at(2.0) + (at(1.0) - at(-1.0)) * 8.0) / (12.0 * F_STEP);
                jac.view_mut((q * g, i), (g, 1)).copy_from(&d);
            }
        }
        jac
    }

    /// Slice-chart layout offsets `(a0, a, p, beta)`.
    pub fn offsets(&self) -> [usize; 4] {
        let (ns, na) = (self.ns(), self.na());
        [0, ns, ns + na, ns + 2 * na]
    }

    pub fn hamiltonian(&self, z: &[f64]) -> f64 {
        let [_, oa, op, ob] = self.offsets();
        let (na, g) = (self.na(), self.ops.g());
        let a = &z[oa..oa + na];
        let p = DVector::from_column_slice(&z[op..op + na]);
        let a0 = DVector::from_column_slice(&z[..self.ns()]);
        let beta = DVector::from_column_slice(&z[ob..ob + na]);
        let mut e = 0.0;
        for l in 0..self.ops.grid.links() {
            let blk = self.ops.group.link_block(self.ops.link(a, l));
            e += 0.5 * (blk.transpose() * p.rows(l * g, g)).norm_squared();
        }
        let gauss = p.dot(&self.ops.apply_gradient(a, &a0));
        let f = self.ops.field_strength(a);
        e + gauss + 0.5 * beta.norm_squared() + beta.dot(&f)
    }

    pub fn hamiltonian_gradient(&self, z: &[f64]) -> DVector<f64> {
        let [_, oa, op, ob] = self.offsets();
        let (na, ns, g) = (self.na(), self.ns(), self.ops.g());
        let a = &z[oa..oa + na];
        let p = DVector::from_column_slice(&z[op..op + na]);
        let a0 = DVector::from_column_slice(&z[..ns]);
        let beta = DVector::from_column_slice(&z[ob..ob + na]);
        let mut out = DVector::zeros(self.full_dim());
        out.rows_mut(0, ns).copy_from(&self.ops.apply_adjoint(a, &p));
        let grad_a0 = self.ops.apply_gradient(a, &a0);
        for l in 0..self.ops.grid.links() {
            let blk = self.ops.group.link_block(self.ops.link(a, l));
            let pl = p.rows(l * g, g);
            let gp = &blk * (blk.transpose() * pl) + grad_a0.rows(l * g, g);
            out.rows_mut(op + l * g, g).copy_from(&gp);
        }
        let f = self.ops.field_strength(a);
        out.rows_mut(ob, na).copy_from(&(&beta + &f));
        let df = self.field_strength_jacobian(a);
        let mag = df.transpose() * &beta;
        for i in 0..na {
            let (l, b) = (i / g, i % g);
            let (tail, head) = self.ops.grid.link_ends(l);
            let blk = self.ops.group.link_block(self.ops.link(a, l));
            let da = self.ops.group.link_block_derivative(self.ops.link(a, l), b);
            let pl = p.rows(l * g, g);
            let kin = (blk.transpose() * pl).dot(&(da.transpose() * pl));
            let gauss = pl.dot(&(&da * a0.rows(head * g, g) - da.transpose() * a0.rows(tail * g, g)));
            out[oa + i] = kin + gauss + mag[i];
        }
        out
    }

    /// `grad(a)^T p` on surface points (zero by construction).
    pub fn gauss_residual(&self, x: &[f64]) -> Result<f64> {
        let pt = self.point(x)?;
        Ok(self.ops.apply_adjoint(&x[..self.na()], &pt.p).amax())
    }

    /// Gauss-surface points near `a_ref`.
    pub fn sample_points(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut g = rng(seed);
        (0..count)
            .map(|_| {
                let mut x: Vec<f64> =
                    self.a_ref.iter().zip(uniform_vec(&mut g, self.na(), -0.05, 0.05)).map(|(a, d)| a + d).collect();
                x.extend(uniform_vec(&mut g, self.m(), -1.0, 1.0));
                x
            })
            .collect()
    }

    /// Generic slice-chart points.
    pub fn sample_full_points(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut g = rng(seed);
        (0..count)
            .map(|_| {
                let mut z = uniform_vec(&mut g, self.ns(), -1.0, 1.0);
                z.extend(self.a_ref.iter().zip(uniform_vec(&mut g, self.na(), -0.05, 0.05)).map(|(a, d)| a + d));
                z.extend(uniform_vec(&mut g, 2 * self.na(), -1.0, 1.0));
                z
            })
            .collect()
    }
}

/// Builds both charts; `seed` fixes the reference field `a_ref`.
pub fn build_lattice_ym(grid: Grid, group: Group, seed: u64) -> Result<YmBuild> {
    let ops = LatticeOps { grid, group };
    let (na, ns, g) = (ops.na(), ops.ns(), ops.g());
    let a_ref = match group {
        Group::U1 => vec![0.0; na],
        Group::Su2 => uniform_vec(&mut rng(seed), na, -0.4, 0.4),
    };
    let nabla = ops.gradient_matrix(&a_ref);
    GreenSolver::new(&(nabla.transpose() * &nabla), group.generic_zero_modes())?;
    let (_, q0, _) = null_space(&nabla.transpose(), 1e-10);
    let psi = range_basis(&nabla.transpose(), 1e-10);
    let m = q0.ncols();

    let mut names = link_names("a", &grid, g);
    names.extend((0..m).map(|i| format!("c{i}")));
    let dom = ops;
    let chart = Chart::with_domain(names, Arc::new(move |x: &[f64]| dom.in_domain(&x[..na])))?;
    let mut full_names = site_names("a0", &grid, g);
    full_names.extend(link_names("a", &grid, g));
    full_names.extend(link_names("p", &grid, g));
    full_names.extend(plaquette_names("beta", &grid, g));
    let full_chart = Chart::with_domain(full_names, Arc::new(move |z: &[f64]| dom.in_domain(&z[ns..ns + na])))?;

    let plaquettes_of_link = Arc::new((0..grid.links()).map(|l| ops.plaquettes_of_link(l)).collect());
    let model = YmModel {
        ops,
        chart: chart.clone(),
        full_chart: full_chart.clone(),
        a_ref,
        q0,
        psi,
        plaquettes_of_link,
    };
    let n = model.dim();
    let r = model.r();

    let m1 = model.clone();
    let structure = PreSymplecticStructure::new(KForm::two_form(chart.clone(), move |x| m1.omega_matrix(x)))?;

    let (m2, m3, m4) = (model.clone(), model.clone(), model.clone());
    let connection = Connection::new(
        chart.clone(),
        r,
        move |x| {
            let pt = m2.point(x)?;
            let b = m2.b_matrix(x, &pt);
            m2.gauge_frame(x, &pt, &b, &m2.psi)
        },
        move |x| Ok(m3.forms_matrix(&m3.point(x)?)),
    )
    .with_exact_dforms(move |x| Ok(m4.dforms(x, &m4.point(x)?)));

    // Slice system.
    let fd = model.full_dim();
    let mut om = DMatrix::zeros(fd, fd);
    let [_, oa, op, ob] = model.offsets();
    for i in 0..na {
        om[(op + i, oa + i)] = 1.0;
        om[(oa + i, op + i)] = -1.0;
    }
    let full_structure = PreSymplecticStructure::new(KForm::constant(full_chart.clone(), AltTensor::from_matrix(&om)))?;
    let (h1, h2) = (model.clone(), model.clone());
    let h = ScalarField::new(full_chart.clone(), move |z| h1.hamiltonian(z))
        .with_gradient(move |z| h2.hamiltonian_gradient(z));
    let system = HamiltonianSystem::new(full_structure, h)?;

    let (p1, p2) = (model.clone(), model.clone());
    let param = ChartMap::new(chart.clone(), full_chart.clone(), move |x| {
        let pt = p1.point(x)?;
        let mut z = DVector::zeros(fd);
        z.rows_mut(oa, na).copy_from_slice(&x[..na]);
        z.rows_mut(op, na).copy_from(&pt.p);
        z.rows_mut(ob, na).copy_from(&(-p1.ops.field_strength(&x[..na])));
        Ok(z)
    })
    .with_jacobian(move |x| {
        let pt = p2.point(x)?;
        let b = p2.b_matrix(x, &pt);
        let mut j = DMatrix::zeros(fd, n);
        j.view_mut((oa, 0), (na, na)).fill_with_identity();
        j.view_mut((op, 0), (na, na)).copy_from(&b);
        j.view_mut((op, na), (na, n - na)).copy_from(&pt.c);
        j.view_mut((ob, 0), (na, na)).copy_from(&(-p2.field_strength_jacobian(&x[..na])));
        Ok(j)
    });

    let mut observables = Registry::new();
    for (i, name) in link_names("p", &grid, g).into_iter().enumerate() {
        let (o1, o2) = (model.clone(), model.clone());
        observables.insert(
            name,
            ScalarField::try_new(chart.clone(), move |x| Ok(o1.point(x)?.p[i])).with_try_gradient(move |x| {
                let pt = o2.point(x)?;
                let b = o2.b_matrix(x, &pt);
                let mut v = DVector::zeros(n);
                v.rows_mut(0, na).copy_from(&b.row(i).transpose());
                v.rows_mut(na, n - na).copy_from(&pt.c.row(i).transpose());
                Ok(v)
            }),
        )?;
    }
    Ok(YmBuild { model, structure, connection, system, param, observables })
}

/// The gauge direction generated by `psi` as a vector field on the surface chart.
pub fn gauge_kernel_field(model: &YmModel, psi: &DVector<f64>) -> VectorField {
    let (m, psi) = (model.clone(), DMatrix::from_column_slice(psi.len(), 1, psi.as_slice()));
    VectorField::try_new(model.chart.clone(), move |x| {
        let pt = m.point(x)?;
        let b = m.b_matrix(x, &pt);
        Ok(m.gauge_frame(x, &pt, &b, &psi)?.column(0).into_owned())
    })
}
