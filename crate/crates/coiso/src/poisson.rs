//! Poisson bivectors: inversion of `Omega`, brackets, the `W / K+K*` block
//! split, projectability and the curved-case anomaly.
//!
//! Convention: `Lambda = Omega^{-1}` as matrices, so that `Omega = dp ^ dq`
//! gives `{q, p} = +1` and `Lambda * Omega = 1`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::connection::Classification;
use crate::embedding::CoisotropicEmbedding;
use crate::geomcore::{jacobiator, Bivector, DiffBackend, KForm, ScalarField};
use crate::linalg::{checked_inverse, max_abs};
use crate::{sweep, Error, Result};

/// Largest accepted condition number when inverting `Omega`.
pub const MAX_COND: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    InverseOfSymplectic,
    Projected,
}

#[derive(Clone)]
pub struct PoissonStructure {
    pub lambda: Bivector,
    pub provenance: Provenance,
}

impl fmt::Debug for PoissonStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PoissonStructure")
            .field("dim", &self.lambda.chart().dim())
            .field("provenance", &self.provenance)
            .finish()
    }
}

impl PoissonStructure {
    pub fn chart(&self) -> &std::sync::Arc<crate::Chart> {
        self.lambda.chart()
    }
}

/// Inverse of a symplectic 2-form on its own chart.
pub fn from_symplectic(omega: &KForm) -> PoissonStructure {
    let om = omega.clone();
    let lambda = Bivector::try_new(omega.chart().clone(), move |x| checked_inverse(&om.eval_matrix(x)?, MAX_COND));
    PoissonStructure { lambda, provenance: Provenance::InverseOfSymplectic }
}

/// `Lambda = Omega^{-1}` on the enlarged chart; near-singular points error
/// with the condition number at evaluation time.
pub fn invert(e: &CoisotropicEmbedding) -> PoissonStructure {
    from_symplectic(&e.omega)
}

/// `max |Lambda Omega - 1|` at `x`.
pub fn inverse_consistency(p: &PoissonStructure, omega: &KForm, x: &[f64]) -> Result<f64> {
    let l = p.lambda.eval(x)?;
    let o = omega.eval_matrix(x)?;
    let n = l.nrows();
    Ok(max_abs(&(l * o - DMatrix::identity(n, n))))
}

/// `{f, g}(x) = Lambda(df, dg)`.
pub fn bracket(p: &PoissonStructure, f: &ScalarField, g: &ScalarField, x: &[f64], backend: &DiffBackend) -> Result<f64> {
    p.chart().ensure_same(f.chart(), "bracket f")?;
    p.chart().ensure_same(g.chart(), "bracket g")?;
    let l = p.lambda.eval(x)?;
    let gf = backend.gradient(f, x)?;
    let gg = backend.gradient(g, x)?;
    Ok(gf.dot(&(l * gg)))
}

/// Max |jacobiator| over the supplied triples and points.
pub fn jacobi_residual(
    p: &PoissonStructure,
    triples: &[(ScalarField, ScalarField, ScalarField)],
    points: &[Vec<f64>],
    backend: &DiffBackend,
) -> Result<f64> {
    let n = triples.len().min(points.len());
    let vals = sweep::try_map(n, |i| {
        let (f, g, h) = &triples[i];
        jacobiator(&p.lambda, f, g, h, &points[i], backend).map(f64::abs)
    })?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

#[derive(Clone)]
pub struct BlockDecomposition {
    pub lambda: Bivector,
    pub lambda_w: Bivector,
    pub lambda_kk: Bivector,
    pub n: usize,
    pub r: usize,
    /// Largest `W`-to-`K+K*` cross component of `Lambda` over the sample points.
    pub cross_residual: f64,
    pub classification: Classification,
}

impl fmt::Debug for BlockDecomposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BlockDecomposition")
            .field("n", &self.n)
            .field("r", &self.r)
            .field("cross_residual", &self.cross_residual)
            .field("classification", &self.classification)
            .finish()
    }
}

/// `R^ = diag(1 - P(x), 0)` on the enlarged tangent space.
fn extended_horizontal(e: &CoisotropicEmbedding, z: &[f64]) -> Result<DMatrix<f64>> {
    let n = e.base.dim();
    let mut r = DMatrix::zeros(e.dim(), e.dim());
    r.view_mut((0, 0), (n, n)).copy_from(&e.connection.horizontal_at(&z[..n])?);
    Ok(r)
}

/// Splits `Lambda = Lambda_W + Lambda_{K+K*}` with `Lambda_W = R^ Lambda R^T`.
/// Cross terms above `tol` are fatal in the CLOSED and FLAT cases and only
/// reported in the CURVED case.
pub fn block_decompose(
    p: &PoissonStructure,
    e: &CoisotropicEmbedding,
    classification: Classification,
    points: &[Vec<f64>],
    tol: f64,
) -> Result<BlockDecomposition> {
    p.chart().ensure_same(&e.enlarged, "decomposition")?;
    let (l1, e1) = (p.lambda.clone(), e.clone());
    let lambda_w = Bivector::try_new(e.enlarged.clone(), move |z| {
        let r = extended_horizontal(&e1, z)?;
        Ok(&r * l1.eval(z)? * r.transpose())
    });
    let (l2, w2) = (p.lambda.clone(), lambda_w.clone());
    let lambda_kk = Bivector::try_new(e.enlarged.clone(), move |z| Ok(l2.eval(z)? - w2.eval(z)?));
    let cross = sweep::try_map(points.len(), |i| -> Result<f64> {
        let z = &points[i];
        let r = extended_horizontal(e, z)?;
        let v = DMatrix::identity(e.dim(), e.dim()) - &r;
        let l = p.lambda.eval(z)?;
        Ok(max_abs(&(&r * l * v.transpose())))
    })?;
    let cross_residual = cross.into_iter().fold(0.0, f64::max);
    if classification != Classification::Curved && !(cross_residual < tol) {
        return Err(Error::Rank(format!(
            "W / K+K* cross terms {cross_residual:e} exceed {tol:e} in the {classification} case"
        )));
    }
    Ok(BlockDecomposition {
        lambda: p.lambda.clone(),
        lambda_w,
        lambda_kk,
        n: e.base.dim(),
        r: e.r,
        cross_residual,
        classification,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ProjectabilityReport {
    pub pass: bool,
    /// Sup over points and `j` of `|d Lambda_W / d mu_j|`.
    pub residual: f64,
    pub per_point: Vec<f64>,
    pub tol: f64,
}

/// `mu`-independence of `Lambda_W`, by central differences in each `mu_j`.
pub fn projectability_check(
    b: &BlockDecomposition,
    points: &[Vec<f64>],
    backend: &DiffBackend,
    tol: f64,
) -> Result<ProjectabilityReport> {
    if b.r == 0 {
        return Ok(ProjectabilityReport { pass: true, residual: 0.0, per_point: vec![0.0; points.len()], tol });
    }
    let per_point = sweep::try_map(points.len(), |i| -> Result<f64> {
        let z = &points[i];
        let mut worst = 0.0f64;
        for j in 0..b.r {
            let mut d = DVector::zeros(b.n + b.r);
            d[b.n + j] = 1.0;
            let dl = backend.directional_matrix(z, &d, |y| b.lambda_w.eval(y))?;
            worst = worst.max(max_abs(&dl));
        }
        Ok(worst)
    })?;
    let residual = per_point.iter().fold(0.0f64, |a, &v| a.max(v));
    Ok(ProjectabilityReport { pass: residual < tol, residual, per_point, tol })
}

/// `lambda_W(x) = Lambda_W(x, 0)` restricted to base coordinates.
pub fn project(b: &BlockDecomposition, report: &ProjectabilityReport, e: &CoisotropicEmbedding) -> Result<PoissonStructure> {
    if !report.pass {
        return Err(Error::Refused(format!(
            "Lambda_W depends on mu (residual {:e}); the bracket does not project",
            report.residual
        )));
    }
    let (w, e1, n) = (b.lambda_w.clone(), e.clone(), e.base.dim());
    let lambda = Bivector::try_new(e.base.clone(), move |x| Ok(w.eval(&e1.sigma0(x))?.view((0, 0), (n, n)).into_owned()));
    Ok(PoissonStructure { lambda, provenance: Provenance::Projected })
}

/// `tau* f`: a base function viewed on the enlarged chart.
pub fn lift(f: &ScalarField, e: &CoisotropicEmbedding) -> ScalarField {
    let (n, dim) = (e.base.dim(), e.dim());
    let f1 = f.clone();
    let out = ScalarField::try_new(e.enlarged.clone(), move |z| f1.eval(&z[..n]));
    if f.has_exact_gradient() {
        let f2 = f.clone();
        out.with_try_gradient(move |z| {
            let g = f2.exact_gradient(&z[..n]).expect("checked")?;
            let mut v = DVector::zeros(dim);
            v.rows_mut(0, n).copy_from(&g);
            Ok(v)
        })
    } else {
        out
    }
}

#[derive(Clone, Debug)]
pub struct AnomalyRecord {
    /// `h(x) = {f~, g~}(x, 0)` on the base.
    pub base_part: ScalarField,
    /// `H(x, mu) = {f~, g~}(x, mu) - h(x)` on the enlarged chart.
    pub anomaly: ScalarField,
    /// `max |H|` on the zero section over the sampled points.
    pub zero_section_residual: f64,
}

/// Splits the bracket of lifted base functions into its zero-section value
/// and the `mu`-dependent anomaly.
pub fn anomaly(
    p: &PoissonStructure,
    e: &CoisotropicEmbedding,
    f: &ScalarField,
    g: &ScalarField,
    points: &[Vec<f64>],
    backend: &DiffBackend,
) -> Result<AnomalyRecord> {
    let (ft, gt) = (lift(f, e), lift(g, e));
    let (p1, e1, f1, g1, b1) = (p.clone(), e.clone(), ft.clone(), gt.clone(), *backend);
    let base_part =
        ScalarField::try_new(e.base.clone(), move |x| bracket(&p1, &f1, &g1, &e1.sigma0(x), &b1));
    let (p2, h2, n, b2) = (p.clone(), base_part.clone(), e.base.dim(), *backend);
    let anomaly = ScalarField::try_new(e.enlarged.clone(), move |z| {
        Ok(bracket(&p2, &ft, &gt, z, &b2)? - h2.eval(&z[..n])?)
    });
    let zs = sweep::try_map(points.len(), |i| anomaly.eval(&e.sigma0(&points[i][..n])).map(f64::abs))?;
    let zero_section_residual = zs.into_iter().fold(0.0, f64::max);
    Ok(AnomalyRecord { base_part, anomaly, zero_section_residual })
}
