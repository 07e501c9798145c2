//! Connections on the kernel bundle: `P = P^j (x) V_j`, validation and the
//! closed / flat / curved classification.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::geomcore::{Chart, DiffBackend, KForm, VectorField};
use crate::linalg::max_abs;
use crate::presympl::{kernel_basis, PreSymplecticStructure};
use crate::sampling::{gaussian_vec, rng};
use crate::{sweep, Error, Result};

pub type MatFn = Arc<dyn Fn(&[f64]) -> Result<DMatrix<f64>> + Send + Sync>;
pub type MatsFn = Arc<dyn Fn(&[f64]) -> Result<Vec<DMatrix<f64>>> + Send + Sync>;

/// The 1-1 tensor `P = sum_j P^j (x) V_j`, evaluated in batches: the frame
/// is an `n x r` matrix whose columns are the `V_j`, the forms an `r x n`
/// matrix whose rows are the `P^j`.
#[derive(Clone)]
pub struct Connection {
    chart: Arc<Chart>,
    r: usize,
    frame: MatFn,
    forms: MatFn,
    dforms: Option<MatsFn>,
    pub backend: DiffBackend,
}

impl fmt::Debug for Connection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Connection")
            .field("dim", &self.chart.dim())
            .field("r", &self.r)
            .field("exact_dP", &self.dforms.is_some())
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Classification {
    Closed,
    Flat,
    Curved,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Classification::Closed => "CLOSED",
            Classification::Flat => "FLAT",
            Classification::Curved => "CURVED",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckFailure {
    pub check: String,
    pub point: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub pass: bool,
    pub idempotence: f64,
    pub verticality: f64,
    pub kernel_membership: f64,
    pub invariance: f64,
    pub failures: Vec<CheckFailure>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CurvatureReport {
    pub classification: Classification,
    /// Per-j sup norms over the sample set.
    pub dp_norm: Vec<f64>,
    pub dhp_norm: Vec<f64>,
    pub dvp_norm: Vec<f64>,
    pub sample_points: usize,
    pub tol: f64,
}

impl CurvatureReport {
    pub fn max_dp(&self) -> f64 {
        self.dp_norm.iter().fold(0.0, |a: f64, &b| a.max(b))
    }
    pub fn max_dhp(&self) -> f64 {
        self.dhp_norm.iter().fold(0.0, |a: f64, &b| a.max(b))
    }
    pub fn max_dvp(&self) -> f64 {
        self.dvp_norm.iter().fold(0.0, |a: f64, &b| a.max(b))
    }
}

impl Connection {
    pub fn new(
        chart: Arc<Chart>,
        r: usize,
        frame: impl Fn(&[f64]) -> Result<DMatrix<f64>> + Send + Sync + 'static,
        forms: impl Fn(&[f64]) -> Result<DMatrix<f64>> + Send + Sync + 'static,
    ) -> Self {
        Connection {
            chart,
            r,
            frame: Arc::new(frame),
            forms: Arc::new(forms),
            dforms: None,
            backend: DiffBackend::default(),
        }
    }

    /// Exact exterior derivatives of the `P^j` (each an antisymmetric `n x n` matrix).
    pub fn with_exact_dforms(
        mut self,
        d: impl Fn(&[f64]) -> Result<Vec<DMatrix<f64>>> + Send + Sync + 'static,
    ) -> Self {
        self.dforms = Some(Arc::new(d));
        self
    }

    pub fn without_exact_dforms(mut self) -> Self {
        self.dforms = None;
        self
    }

    pub fn with_backend(mut self, b: DiffBackend) -> Self {
        self.backend = b;
        self
    }

    /// Builds a connection from individual fields; exact `dP^j` are used when
    /// every form carries an exact derivative.
    pub fn from_fields(vertical: Vec<VectorField>, p_forms: Vec<KForm>) -> Result<Self> {
        if vertical.len() != p_forms.len() || vertical.is_empty() {
            return Err(Error::Dimension("frame and form counts differ or are zero".into()));
        }
        let chart = vertical[0].chart().clone();
        for f in &p_forms {
            chart.ensure_same(f.chart(), "connection forms")?;
            if f.degree() != 1 {
                return Err(Error::Invalid("connection forms must be 1-forms".into()));
            }
        }
        let r = vertical.len();
        let (v1, p1) = (vertical.clone(), p_forms.clone());
        let mut c = Connection::new(
            chart,
            r,
            move |x| {
                let cols: Vec<DVector<f64>> = v1.iter().map(|v| v.eval(x)).collect::<Result<_>>()?;
                Ok(DMatrix::from_columns(&cols))
            },
            move |x| {
                let rows: Vec<DVector<f64>> = p1.iter().map(|p| p.eval_covector(x)).collect::<Result<_>>()?;
                Ok(DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j]))
            },
        );
        if p_forms.iter().all(|p| p.has_exact_d()) {
            let ds: Vec<KForm> = p_forms.iter().map(|p| p.exact_d().expect("checked")).collect();
            c = c.with_exact_dforms(move |x| ds.iter().map(|d| d.eval_matrix(x)).collect());
        }
        Ok(c)
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn has_exact_dforms(&self) -> bool {
        self.dforms.is_some()
    }

    pub fn frame_at(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.chart.check(x)?;
        let m = (self.frame)(x)?;
        if m.shape() != (self.chart.dim(), self.r) {
            return Err(Error::Dimension("connection frame shape".into()));
        }
        Ok(m)
    }

    pub fn forms_at(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.chart.check(x)?;
        let m = (self.forms)(x)?;
        if m.shape() != (self.r, self.chart.dim()) {
            return Err(Error::Dimension("connection forms shape".into()));
        }
        Ok(m)
    }

    /// Pointwise matrix of `P`.
    pub fn projector_at(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.frame_at(x)? * self.forms_at(x)?)
    }

    /// Pointwise matrix of the horizontal projector `1 - P`.
    pub fn horizontal_at(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.chart.dim();
        Ok(DMatrix::identity(n, n) - self.projector_at(x)?)
    }

    pub fn vertical_field(&self, j: usize) -> VectorField {
        let c = self.clone();
        VectorField::try_new(self.chart.clone(), move |x| Ok(c.frame_at(x)?.column(j).into_owned()))
    }

    pub fn p_form(&self, j: usize) -> KForm {
        let c = self.clone();
        let f = KForm::one_form(self.chart.clone(), move |x| Ok(c.forms_at(x)?.row(j).transpose()));
        if self.dforms.is_some() {
            let c2 = self.clone();
            let chart = self.chart.clone();
            f.with_exact_d(KForm::two_form(chart, move |x| Ok(c2.dp_at(x)?.swap_remove(j))))
        } else {
            f
        }
    }

    /// Exterior derivatives `dP^j` at `x` through the backend.
    pub fn dp_at(&self, x: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        self.chart.check(x)?;
        if self.backend.hooks_allowed() {
            if let Some(d) = &self.dforms {
                return d(x);
            }
        }
        if self.backend.is_exact() {
            return Err(Error::MissingExactDerivative("connection forms".into()));
        }
        let n = self.chart.dim();
        let h = self.backend.h;
        let mut y = x.to_vec();
        let mut partials = Vec::with_capacity(n);
        for i in 0..n {
            y[i] = x[i] + h;
            let fp = self.forms_at(&y)?;
            y[i] = x[i] - h;
            let fm = self.forms_at(&y)?;
            y[i] = x[i];
            partials.push((fp - fm) / (2.0 * h));
        }
        Ok((0..self.r)
            .map(|j| DMatrix::from_fn(n, n, |i, k| partials[i][(j, k)] - partials[k][(j, i)]))
            .collect())
    }

    /// Same frame, forms scaled by `c` (for constructing invalid examples).
    pub fn scaled(&self, c: f64) -> Connection {
        let f = self.forms.clone();
        let mut out = self.clone();
        out.forms = Arc::new(move |x| Ok(f(x)? * c));
        out.dforms = self.dforms.clone().map(|d| -> MatsFn {
            Arc::new(move |x| Ok(d(x)?.into_iter().map(|m| m * c).collect()))
        });
        out
    }
}

/// Checks idempotence, verticality, kernel membership and first-order
/// invariance of the horizontal distribution under the vertical flows.
pub fn validate(
    c: &Connection,
    s: &PreSymplecticStructure,
    points: &[Vec<f64>],
    tol: f64,
) -> Result<ValidationReport> {
    c.chart.ensure_same(s.chart(), "connection vs structure")?;
    let inv_tol = tol.max(c.backend.default_tolerance());
    let rows = sweep::try_map(points.len(), |i| -> Result<[f64; 4]> {
        let x = &points[i];
        let kb = kernel_basis(s, x)?;
        if kb.corank() != c.r {
            return Err(Error::Dimension(format!(
                "connection rank {} but kernel dimension {} at point {i}",
                c.r,
                kb.corank()
            )));
        }
        let v = c.frame_at(x)?;
        let forms = c.forms_at(x)?;
        let p = &v * &forms;
        let idem = max_abs(&(&p * &p - &p));
        let vert = max_abs(&(&p * &v - &v));
        let om = s.omega.eval_matrix(x)?;
        let memb = max_abs(&(&om * &v)) / max_abs(&om).max(1e-300) / max_abs(&v).max(1e-300);
        let inv = invariance_residual(c, x, i as u64)?;
        Ok([idem, vert, memb, inv])
    })?;
    let mut report = ValidationReport {
        pass: true,
        idempotence: 0.0,
        verticality: 0.0,
        kernel_membership: 0.0,
        invariance: 0.0,
        failures: Vec::new(),
    };
    let names = ["idempotence", "verticality", "kernel_membership", "invariance"];
    for (i, row) in rows.iter().enumerate() {
        report.idempotence = report.idempotence.max(row[0]);
        report.verticality = report.verticality.max(row[1]);
        report.kernel_membership = report.kernel_membership.max(row[2]);
        report.invariance = report.invariance.max(row[3]);
        for (k, name) in names.iter().enumerate() {
            let t = if k == 3 { inv_tol } else { tol };
            if !(row[k] < t) {
                report.failures.push(CheckFailure { check: name.to_string(), point: i, residual: row[k] });
            }
        }
    }
    report.pass = report.failures.is_empty();
    Ok(report)
}

/// `max_j |P [V_j, H]|` for a random horizontal field `H = (1 - P) u`.
fn invariance_residual(c: &Connection, x: &[f64], salt: u64) -> Result<f64> {
    let n = c.chart.dim();
    let mut g = rng(0x5eed ^ salt);
    let u = DVector::from_vec(gaussian_vec(&mut g, n)).normalize();
    let h = c.backend.h;
    let horiz = |y: &[f64]| -> Result<DVector<f64>> { Ok(c.horizontal_at(y)? * &u) };
    let shift = |d: &DVector<f64>, s: f64| -> Vec<f64> { x.iter().zip(d.iter()).map(|(a, b)| a + s * h * b).collect() };
    let v = c.frame_at(x)?;
    let hx = horiz(x)?;
    let p = c.projector_at(x)?;
    // Directional derivatives of the frame along H, one evaluation pair for all columns.
    let dv_h = (c.frame_at(&shift(&hx, 1.0))? - c.frame_at(&shift(&hx, -1.0))?) / (2.0 * h);
    let mut worst = 0.0f64;
    for j in 0..c.r {
        let vj = v.column(j).into_owned();
        let dh_v = (horiz(&shift(&vj, 1.0))? - horiz(&shift(&vj, -1.0))?) / (2.0 * h);
        let bracket = dh_v - dv_h.column(j);
        worst = worst.max((&p * bracket).amax());
    }
    Ok(worst / max_abs(&v).max(1e-300))
}

/// Horizontal / vertical polarizations of `dP^j` and the resulting class.
pub fn curvature_decomposition(c: &Connection, points: &[Vec<f64>], tol: Option<f64>) -> Result<CurvatureReport> {
    let tol = tol.unwrap_or_else(|| c.backend.classification_tolerance());
    let per_point = sweep::try_map(points.len(), |i| -> Result<Vec<[f64; 3]>> {
        let x = &points[i];
        let dps = c.dp_at(x)?;
        let p = c.projector_at(x)?;
        let n = c.chart.dim();
        let r = DMatrix::identity(n, n) - &p;
        Ok(dps
            .iter()
            .map(|m| {
                let dh = r.transpose() * m * &r;
                let dv = p.transpose() * m * &p;
                [max_abs(m), max_abs(&dh), max_abs(&dv)]
            })
            .collect())
    })?;
    let mut dp = vec![0.0f64; c.r];
    let mut dh = vec![0.0f64; c.r];
    let mut dv = vec![0.0f64; c.r];
    for row in &per_point {
        for (j, v) in row.iter().enumerate() {
            dp[j] = dp[j].max(v[0]);
            dh[j] = dh[j].max(v[1]);
            dv[j] = dv[j].max(v[2]);
        }
    }
    let mut report = CurvatureReport {
        classification: Classification::Closed,
        dp_norm: dp,
        dhp_norm: dh,
        dvp_norm: dv,
        sample_points: points.len(),
        tol,
    };
    report.classification = if report.max_dp() < tol {
        Classification::Closed
    } else if report.max_dhp() < tol {
        Classification::Flat
    } else {
        Classification::Curved
    };
    Ok(report)
}
