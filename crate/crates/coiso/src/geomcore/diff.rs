use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::fields::{ScalarField, VectorField};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffMode {
    /// Second-order central differences with step `h`.
    CentralDifference,
    /// Only derivatives supplied with the fields; missing hooks are errors.
    UserExact,
}

/// How derivatives are obtained.
///
/// In central-difference mode exact hooks attached to a field are used when
/// `use_hooks` is set and ignored otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffBackend {
    pub mode: DiffMode,
    pub h: f64,
    pub use_hooks: bool,
}

impl Default for DiffBackend {
    fn default() -> Self {
        DiffBackend { mode: DiffMode::CentralDifference, h: 1e-5, use_hooks: true }
    }
}

impl DiffBackend {
    pub fn central(h: f64) -> Self {
        assert!(h > 0.0, "step must be positive");
        DiffBackend { mode: DiffMode::CentralDifference, h, use_hooks: true }
    }

    /// Central differences everywhere, ignoring any exact hooks.
    pub fn fd_only(h: f64) -> Self {
        DiffBackend { use_hooks: false, ..Self::central(h) }
    }

    pub fn exact() -> Self {
        DiffBackend { mode: DiffMode::UserExact, h: 1e-5, use_hooks: true }
    }

    pub fn is_exact(&self) -> bool {
        self.mode == DiffMode::UserExact
    }

    pub fn hooks_allowed(&self) -> bool {
        self.is_exact() || self.use_hooks
    }

    /// Default comparison tolerance for derivative-based checks.
    pub fn default_tolerance(&self) -> f64 {
        if self.is_exact() {
            1e-8
        } else {
            1e-4
        }
    }

    /// Default tolerance for the closed / flat / curved classification.
    pub fn classification_tolerance(&self) -> f64 {
        if self.is_exact() {
            1e-6
        } else {
            1e-3
        }
    }

    pub fn gradient(&self, f: &ScalarField, x: &[f64]) -> Result<DVector<f64>> {
        if self.hooks_allowed() {
            if let Some(g) = f.exact_gradient(x) {
                return g;
            }
        }
        if self.is_exact() {
            return Err(Error::MissingExactDerivative("scalar field gradient".into()));
        }
        f.chart().check(x)?;
        let h = self.h;
        let mut g = DVector::zeros(x.len());
        let mut y = x.to_vec();
        for i in 0..x.len() {
            y[i] = x[i] + h;
            let fp = f.eval(&y)?;
            y[i] = x[i] - h;
            let fm = f.eval(&y)?;
            y[i] = x[i];
            g[i] = (fp - fm) / (2.0 * h);
        }
        Ok(g)
    }

    /// Jacobian `d X^i / d x^j` of a vector field.
    pub fn vector_jacobian(&self, v: &VectorField, x: &[f64]) -> Result<DMatrix<f64>> {
        if self.hooks_allowed() {
            if let Some(j) = v.exact_jacobian(x) {
                return j;
            }
        }
        if self.is_exact() {
            return Err(Error::MissingExactDerivative("vector field Jacobian".into()));
        }
        self.fd_jacobian(x, |y| v.eval(y))
    }

    /// Central-difference Jacobian of an arbitrary vector-valued map.
    pub fn fd_jacobian(
        &self,
        x: &[f64],
        f: impl Fn(&[f64]) -> Result<DVector<f64>>,
    ) -> Result<DMatrix<f64>> {
        let h = self.h;
        let mut y = x.to_vec();
        let mut cols = Vec::with_capacity(x.len());
        for i in 0..x.len() {
            y[i] = x[i] + h;
            let fp = f(&y)?;
            y[i] = x[i] - h;
            let fm = f(&y)?;
            y[i] = x[i];
            cols.push((fp - fm) / (2.0 * h));
        }
        if cols.is_empty() {
            return Ok(DMatrix::zeros(0, 0));
        }
        Ok(DMatrix::from_columns(&cols))
    }

    /// Central difference of a matrix-valued map along direction `v`.
    pub fn directional_matrix(
        &self,
        x: &[f64],
        v: &DVector<f64>,
        f: impl Fn(&[f64]) -> Result<DMatrix<f64>>,
    ) -> Result<DMatrix<f64>> {
        let h = self.h;
        let xp: Vec<f64> = x.iter().zip(v.iter()).map(|(a, b)| a + h * b).collect();
        let xm: Vec<f64> = x.iter().zip(v.iter()).map(|(a, b)| a - h * b).collect();
        Ok((f(&xp)? - f(&xm)?) / (2.0 * h))
    }

    /// Central difference of a scalar map along direction `v`.
    pub fn directional(
        &self,
        x: &[f64],
        v: &DVector<f64>,
        f: impl Fn(&[f64]) -> Result<f64>,
    ) -> Result<f64> {
        let h = self.h;
        let xp: Vec<f64> = x.iter().zip(v.iter()).map(|(a, b)| a + h * b).collect();
        let xm: Vec<f64> = x.iter().zip(v.iter()).map(|(a, b)| a - h * b).collect();
        Ok((f(&xp)? - f(&xm)?) / (2.0 * h))
    }
}
