//! Dense linear-algebra helpers built on nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Singular value decomposition with singular values sorted descending.
/// Wide matrices are zero-padded to square so that the full right singular
/// basis is always available.
pub struct SortedSvd {
    pub sigma: Vec<f64>,
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
}

pub fn sorted_svd(m: &DMatrix<f64>) -> SortedSvd {
    let (rows, cols) = m.shape();
    let a = if rows < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = a.svd(true, true);
    let u = svd.u.expect("u requested");
    let v = svd.v_t.expect("v requested").transpose();
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .partial_cmp(&svd.singular_values[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let sigma = order.iter().map(|&i| svd.singular_values[i]).collect();
    let u = DMatrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    let v = DMatrix::from_fn(v.nrows(), order.len(), |r, c| v[(r, order[c])]);
    SortedSvd { sigma, u, v }
}

/// Right null space of `m`: columns with singular value below
/// `rel_tol * sigma_max`. Returns (rank, basis, sorted singular values).
pub fn null_space(m: &DMatrix<f64>, rel_tol: f64) -> (usize, DMatrix<f64>, Vec<f64>) {
    let n = m.ncols();
    let svd = sorted_svd(m);
    let smax = svd.sigma.first().copied().unwrap_or(0.0);
    let cut = rel_tol * smax;
    let rank = svd.sigma.iter().filter(|&&s| s > cut && s > 0.0).count();
    let basis = svd.v.columns(rank, n - rank).into_owned();
    (rank, basis, svd.sigma)
}

/// Orthonormal basis of the column space of `m`.
pub fn range_basis(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let svd = sorted_svd(m);
    let smax = svd.sigma.first().copied().unwrap_or(0.0);
    let rank = svd.sigma.iter().filter(|&&s| s > rel_tol * smax && s > 0.0).count();
    svd.u.view((0, 0), (m.nrows(), rank)).into_owned()
}

/// Pseudo-inverse of a symmetric positive semidefinite matrix together with
/// its numerical nullity.
pub struct SymPinv {
    pub pinv: DMatrix<f64>,
    pub nullity: usize,
    pub kernel: DMatrix<f64>,
}

pub fn sym_pinv(m: &DMatrix<f64>, rel_tol: f64) -> SymPinv {
    let n = m.nrows();
    let eig = m.clone().symmetric_eigen();
    let lmax = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let cut = rel_tol * lmax;
    let mut pinv = DMatrix::zeros(n, n);
    let mut kernel_cols = Vec::new();
    for k in 0..n {
        let l = eig.eigenvalues[k];
        let v = eig.eigenvectors.column(k);
        if l.abs() > cut && l != 0.0 {
            pinv += (v * v.transpose()) / l;
        } else {
            kernel_cols.push(v.into_owned());
        }
    }
    let kernel = if kernel_cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&kernel_cols)
    };
    SymPinv { pinv, nullity: kernel_cols.len(), kernel }
}

/// Inverse with a 1-norm condition estimate; fails when the estimate
/// exceeds `max_cond`.
pub fn checked_inverse(m: &DMatrix<f64>, max_cond: f64) -> Result<DMatrix<f64>> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("matrix inverse".into()));
    }
    let inv = m.clone().lu().try_inverse().ok_or(Error::Singular { cond: f64::INFINITY })?;
    let cond = norm1(m) * norm1(&inv);
    if !cond.is_finite() || cond > max_cond {
        return Err(Error::Singular { cond });
    }
    Ok(inv)
}

pub fn norm1(m: &DMatrix<f64>) -> f64 {
    (0..m.ncols())
        .map(|c| m.column(c).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
}

pub fn max_abs_vec(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
}

/// log |det m| from an LU factorization (no overflow for large dimensions).
pub fn log_abs_det(m: &DMatrix<f64>) -> f64 {
    let lu = m.clone().lu();
    let u = lu.u();
    (0..u.nrows()).map(|i| u[(i, i)].abs().ln()).sum()
}

/// Nearest orthogonal matrix in the Frobenius sense (polar factor), plus the
/// smallest singular value of the input.
pub fn polar_factor(m: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    if m.nrows() == 0 {
        return (m.clone(), 1.0);
    }
    let svd = m.clone().svd(true, true);
    let smin = svd.singular_values.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v requested");
    (u * vt, smin)
}

pub fn antisymmetry_defect(m: &DMatrix<f64>) -> f64 {
    let scale = max_abs(m).max(1e-300);
    max_abs(&(m + m.transpose())) / scale
}
