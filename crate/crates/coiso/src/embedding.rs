//! The coisotropic embedding `(M, omega) -> (M x R^r, Omega)` with
//! `Omega = tau*omega + dmu_j ^ P^j + mu_j dP^j`, and its certificates.

use std::sync::Arc;

use nalgebra::{Complex, DMatrix, DVector};
use serde::Serialize;

use crate::connection::Connection;
use crate::geomcore::{Bivector, Chart, DiffBackend, KForm};
use crate::linalg::{log_abs_det, max_abs, sorted_svd};
use crate::presympl::{kernel_basis, PreSymplecticStructure};
use crate::sampling::{gaussian_vec, rng};
use crate::{sweep, Error, Result};

#[derive(Clone, Debug)]
pub struct CoisotropicEmbedding {
    pub base: Arc<Chart>,
    pub enlarged: Arc<Chart>,
    pub r: usize,
    pub structure: PreSymplecticStructure,
    pub connection: Connection,
    /// `tau* omega`.
    pub tau_omega: KForm,
    /// `dmu_j ^ P^j`.
    pub dmu_p: KForm,
    /// `alpha = mu_j dP^j`.
    pub alpha: KForm,
    /// The full symplectic form.
    pub omega: KForm,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClosedReport {
    pub residual: f64,
    pub per_point: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoisotropyReport {
    pub pass: bool,
    pub pullback_residual: f64,
    pub mu_bracket_residual: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TubularReport {
    /// `f64::INFINITY` when `det Omega` does not depend on `mu`.
    #[serde(serialize_with = "ser_radius")]
    pub radius: f64,
    /// `(rho, worst log|det| margin over samples)`; positive means nondegenerate.
    pub profile: Vec<(f64, f64)>,
}

fn ser_radius<S: serde::Serializer>(r: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if r.is_finite() {
        s.serialize_f64(*r)
    } else {
        s.serialize_str("inf")
    }
}

fn mu_names(base: &Chart, r: usize) -> Result<Vec<String>> {
    let names: Vec<String> = if r == 1 { vec!["mu".into()] } else { (1..=r).map(|j| format!("mu{j}")).collect() };
    for n in &names {
        if base.index_of(n).is_some() {
            return Err(Error::Invalid(format!("base chart already has a coordinate named {n}")));
        }
    }
    Ok(names)
}

impl CoisotropicEmbedding {
    /// Assembles `Omega`; `probe` is a base point used to check that the
    /// connection rank matches the kernel dimension of `omega`.
    pub fn build(s: &PreSymplecticStructure, c: &Connection, probe: &[f64]) -> Result<Self> {
        let base = s.chart().clone();
        base.ensure_same(c.chart(), "structure vs connection")?;
        let kb = kernel_basis(s, probe)?;
        let r = c.r();
        if kb.corank() != r {
            return Err(Error::Dimension(format!("connection rank {r} but kernel dimension {}", kb.corank())));
        }
        let n = base.dim();
        let enlarged = if r == 0 {
            base.clone()
        } else {
            let mut names = base.names().to_vec();
            names.extend(mu_names(&base, r)?);
            let bdom = base.clone();
            Chart::with_domain(names, Arc::new(move |z: &[f64]| bdom.contains(&z[..n])))?
        };
        let dim = n + r;

        let om = s.omega.clone();
        let mut tau_omega = KForm::try_new(enlarged.clone(), 2, move |z| Ok(om.eval(&z[..n])?.embed(dim)));
        if let Some(d) = s.omega.exact_d() {
            let ch = enlarged.clone();
            tau_omega = tau_omega.with_exact_d_lazy(move || {
                let d = d.clone();
                KForm::try_new(ch.clone(), 3, move |z| Ok(d.eval(&z[..n])?.embed(dim)))
            });
        }

        let c1 = c.clone();
        let dmu_p = KForm::two_form(enlarged.clone(), move |z| {
            let f = c1.forms_at(&z[..n])?;
            Ok(pairing_block(&f, n))
        });

        let c2 = c.clone();
        let alpha = KForm::two_form(enlarged.clone(), move |z| {
            let mut m = DMatrix::zeros(dim, dim);
            let mu = &z[n..];
            if mu.iter().any(|&v| v != 0.0) {
                let dps = c2.dp_at(&z[..n])?;
                add_alpha(&mut m, &dps, mu, n);
            }
            Ok(m)
        });

        let (om2, c3) = (s.omega.clone(), c.clone());
        let omega = KForm::two_form(enlarged.clone(), move |z| {
            let x = &z[..n];
            let f = c3.forms_at(x)?;
            let mut m = pairing_block(&f, n);
            let w = om2.eval_matrix(x)?;
            let mut blk = m.view_mut((0, 0), (n, n));
            blk += &w;
            let mu = &z[n..];
            if mu.iter().any(|&v| v != 0.0) {
                add_alpha(&mut m, &c3.dp_at(x)?, mu, n);
            }
            Ok(m)
        });

        Ok(CoisotropicEmbedding {
            base,
            enlarged,
            r,
            structure: s.clone(),
            connection: c.clone(),
            tau_omega,
            dmu_p,
            alpha,
            omega,
        })
    }

    pub fn dim(&self) -> usize {
        self.enlarged.dim()
    }

    /// `Omega_0^ext = tau*omega + dmu_j ^ P^j` (not closed unless `dP = 0`).
    pub fn omega0_ext(&self) -> Result<KForm> {
        crate::geomcore::lin_comb(&[(1.0, self.tau_omega.clone()), (1.0, self.dmu_p.clone())])
    }

    pub fn tau(&self, z: &[f64]) -> Vec<f64> {
        z[..self.base.dim()].to_vec()
    }

    pub fn sigma0(&self, x: &[f64]) -> Vec<f64> {
        let mut z = x.to_vec();
        z.resize(self.dim(), 0.0);
        z
    }

    pub fn with_mu(&self, x: &[f64], mu: &[f64]) -> Vec<f64> {
        let mut z = x.to_vec();
        z.extend_from_slice(mu);
        z
    }

    pub fn omega_at(&self, z: &[f64]) -> Result<DMatrix<f64>> {
        self.omega.eval_matrix(z)
    }
}

fn pairing_block(f: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    let r = f.nrows();
    let mut m = DMatrix::zeros(n + r, n + r);
    for j in 0..r {
        for i in 0..n {
            let v = f[(j, i)];
            m[(n + j, i)] = v;
            m[(i, n + j)] = -v;
        }
    }
    m
}

fn add_alpha(m: &mut DMatrix<f64>, dps: &[DMatrix<f64>], mu: &[f64], n: usize) {
    let mut blk = m.view_mut((0, 0), (n, n));
    for (dp, &c) in dps.iter().zip(mu) {
        if c != 0.0 {
            blk += dp * c;
        }
    }
}

/// Sup over points and random unit triples of `|dF(X,Y,Z)|`, by central
/// differences of the 2-form `F` along constant vector fields.
pub fn closedness_residual(form: &KForm, points: &[Vec<f64>], h: f64, seed: u64) -> Result<ClosedReport> {
    if form.degree() != 2 {
        return Err(Error::Invalid("closedness check expects a 2-form".into()));
    }
    let n = form.chart().dim();
    let fd = DiffBackend::fd_only(h);
    let per_point = sweep::try_map(points.len(), |i| -> Result<f64> {
        let x = &points[i];
        let mut g = rng(seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let mut worst = 0.0f64;
        for _ in 0..2 {
            let v: Vec<DVector<f64>> = (0..3).map(|_| DVector::from_vec(gaussian_vec(&mut g, n)).normalize()).collect();
            let along = |d: &DVector<f64>| fd.directional_matrix(x, d, |y| form.eval_matrix(y));
            let (dx, dy, dz) = (along(&v[0])?, along(&v[1])?, along(&v[2])?);
            let pair = |m: &DMatrix<f64>, a: &DVector<f64>, b: &DVector<f64>| a.dot(&(m * b));
            let val = pair(&dx, &v[1], &v[2]) - pair(&dy, &v[0], &v[2]) + pair(&dz, &v[0], &v[1]);
            worst = worst.max(val.abs());
        }
        Ok(worst)
    })?;
    let residual = per_point.iter().fold(0.0f64, |a, &b| a.max(b));
    Ok(ClosedReport { residual, per_point })
}

/// `dOmega` residual at the given enlarged points.
pub fn certify_closed(e: &CoisotropicEmbedding, points: &[Vec<f64>]) -> Result<ClosedReport> {
    closedness_residual(&e.omega, points, e.connection.backend.h, 0xc105ed)
}

/// Checks `sigma0* Omega = omega` and `{mu_j, mu_k} = 0` on the zero section.
pub fn certify_coisotropic(
    e: &CoisotropicEmbedding,
    lambda: &Bivector,
    base_points: &[Vec<f64>],
    tol: f64,
) -> Result<CoisotropyReport> {
    let n = e.base.dim();
    let rows = sweep::try_map(base_points.len(), |i| -> Result<(f64, f64)> {
        let x = &base_points[i];
        let z = e.sigma0(x);
        let big = e.omega.eval_matrix(&z)?;
        let w = e.structure.omega.eval_matrix(x)?;
        let pull = max_abs(&(big.view((0, 0), (n, n)) - &w));
        let mu = if e.r == 0 {
            0.0
        } else {
            let l = lambda.eval(&z)?;
            max_abs(&l.view((n, n), (e.r, e.r)).into_owned())
        };
        Ok((pull, mu))
    })?;
    let pullback_residual = rows.iter().fold(0.0f64, |a, r| a.max(r.0));
    let mu_bracket_residual = rows.iter().fold(0.0f64, |a, r| a.max(r.1));
    Ok(CoisotropyReport {
        pass: pullback_residual < tol && mu_bracket_residual < tol,
        pullback_residual,
        mu_bracket_residual,
        tol,
    })
}

/// `Omega(x, mu)` counts as degenerate once `|det|` drops below this
/// fraction of `|det Omega(x, 0)|`.
pub const DEGENERACY_TOL: f64 = 1e-10;

fn det_invariant(e: &CoisotropicEmbedding, base_points: &[Vec<f64>], dirs: &[DVector<f64>]) -> Result<bool> {
    // The spectra already cover every direction; one axis and one random
    // direction per point suffice as a cross-check.
    let picks = [&dirs[0], &dirs[dirs.len() - 1]];
    for x in base_points {
        let d0 = log_abs_det(&e.omega.eval_matrix(&e.sigma0(x))?);
        for d in picks {
            for rho in [1e3, 1e6] {
                let mu: Vec<f64> = d.iter().map(|v| v * rho).collect();
                if (log_abs_det(&e.omega.eval_matrix(&e.with_mu(x, &mu))?) - d0).abs() > 1e-6 {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Certified `mu`-radius on which `Omega` stays nondegenerate over the
/// sampled base points; reports the last passing radius of a doubling grid
/// refined by bisection.
pub fn tubular_radius(
    e: &CoisotropicEmbedding,
    base_points: &[Vec<f64>],
    mu_samples: usize,
    seed: u64,
) -> Result<TubularReport> {
    if e.r == 0 {
        return Ok(TubularReport { radius: f64::INFINITY, profile: Vec::new() });
    }
    let mut g = rng(seed);
    let mut dirs: Vec<DVector<f64>> = Vec::new();
    for j in 0..e.r {
        for s in [1.0, -1.0] {
            let mut d = DVector::zeros(e.r);
            d[j] = s;
            dirs.push(d);
        }
    }
    for _ in 0..mu_samples {
        dirs.push(DVector::from_vec(gaussian_vec(&mut g, e.r)).normalize());
    }
    let n = e.base.dim();

    // Omega(x, rho d) = Omega(x, 0) + rho D_d is affine in mu, so
    // det Omega(x, rho d) / det Omega(x, 0) = prod_k (1 + rho lambda_k) with
    // lambda_k the eigenvalues of Omega(x, 0)^{-1} D_d.
    let spectra = sweep::try_map(base_points.len(), |i| -> Result<Option<Vec<Vec<Complex<f64>>>>> {
        let x = &base_points[i];
        let m0 = e.omega.eval_matrix(&e.sigma0(x))?;
        let sv = sorted_svd(&m0).sigma;
        let (smax, smin) = (sv[0], sv[sv.len() - 1]);
        if !(smin > 1e-12 * smax) {
            return Err(Error::Singular { cond: smax / smin });
        }
        let dps = e.connection.dp_at(x)?;
        let inv = m0.clone().lu().try_inverse().ok_or(Error::Singular { cond: f64::INFINITY })?;
        let scale = max_abs(&m0).max(1.0);
        let mut any = false;
        let mut out = Vec::with_capacity(dirs.len());
        for (k, d) in dirs.iter().enumerate() {
            let mut dm = DMatrix::zeros(e.dim(), e.dim());
            add_alpha(&mut dm, &dps, d.as_slice(), n);
            if k == 0 {
                // The affine model must reproduce the assembled form.
                let direct = e.omega.eval_matrix(&e.with_mu(x, d.as_slice()))?;
                let gap = max_abs(&(direct - &m0 - &dm));
                if gap > 1e-9 * scale {
                    return Err(Error::Invalid(format!("Omega is not affine in mu (gap {gap:e})")));
                }
            }
            any |= max_abs(&dm) > 1e-12 * scale;
            out.push((&inv * dm).complex_eigenvalues().iter().copied().collect());
        }
        Ok(any.then_some(out))
    })?;
    if spectra.iter().all(Option::is_none) {
        return Ok(TubularReport { radius: f64::INFINITY, profile: Vec::new() });
    }
    let spectra: Vec<Vec<Vec<Complex<f64>>>> = spectra.into_iter().flatten().collect();
    // Nilpotent m0^{-1} D: det Omega does not depend on mu. Confirmed by
    // direct determinants far out before claiming an infinite radius.
    let lam_max = spectra.iter().flatten().flatten().fold(0.0f64, |a, l| a.max(l.norm()));
    if lam_max < 1e-6 && det_invariant(e, base_points, &dirs)? {
        return Ok(TubularReport { radius: f64::INFINITY, profile: Vec::new() });
    }
    let log_tol = DEGENERACY_TOL.ln();
    let margin = |rho: f64| -> Result<f64> {
        let mut worst = f64::INFINITY;
        for point in &spectra {
            for lam in point {
                let v: f64 = lam.iter().map(|l| (Complex::new(1.0, 0.0) + l * rho).norm().ln()).sum();
                worst = worst.min(v - log_tol);
            }
        }
        Ok(worst)
    };

    let mut profile = Vec::new();
    let mut last_pass = 0.0;
    let mut first_fail = None;
    for k in 0..=20 {
        let rho = 2f64.powi(k) / 16.0;
        let m = margin(rho)?;
        profile.push((rho, m));
        if m > 0.0 {
            last_pass = rho;
        } else {
            first_fail = Some(rho);
            break;
        }
    }
    if let Some(mut hi) = first_fail {
        let mut lo = last_pass;
        for _ in 0..30 {
            let mid = 0.5 * (lo + hi);
            if margin(mid)? > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        last_pass = lo;
    }
    Ok(TubularReport { radius: last_pass, profile })
}
