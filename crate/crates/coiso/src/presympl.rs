//! Rank and kernel analysis of pre-symplectic 2-forms.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::geomcore::{Chart, KForm};
use crate::linalg::{max_abs, polar_factor, sorted_svd};
use crate::{sweep, Error, Result};

/// Closed 2-form of (assumed) constant rank on a chart.
#[derive(Clone, Debug)]
pub struct PreSymplecticStructure {
    pub omega: KForm,
    /// Kernel threshold relative to the largest singular value.
    pub rank_tol: f64,
}

#[derive(Debug, Clone)]
pub struct KernelBasis {
    pub rank: usize,
    /// Orthonormal columns spanning ker omega(p).
    pub basis: DMatrix<f64>,
    pub sigma: Vec<f64>,
}

impl KernelBasis {
    pub fn corank(&self) -> usize {
        self.basis.ncols()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RankCertificate {
    pub pass: bool,
    pub coranks: Vec<usize>,
    /// Per point: (smallest retained singular value, largest discarded), relative to sigma_max.
    pub gaps: Vec<(f64, f64)>,
    pub offending_point: Option<usize>,
}

/// Kernel frames along an ordered path of points.
#[derive(Debug, Clone)]
pub struct KernelFrame {
    pub base_points: Vec<Vec<f64>>,
    pub frames: Vec<DMatrix<f64>>,
    pub r: usize,
}

impl PreSymplecticStructure {
    pub fn new(omega: KForm) -> Result<Self> {
        if omega.degree() != 2 {
            return Err(Error::Invalid("pre-symplectic form must have degree 2".into()));
        }
        Ok(PreSymplecticStructure { omega, rank_tol: 1e-8 })
    }

    pub fn with_rank_tol(mut self, tol: f64) -> Self {
        self.rank_tol = tol;
        self
    }

    pub fn chart(&self) -> &Arc<Chart> {
        self.omega.chart()
    }

    pub fn dim(&self) -> usize {
        self.chart().dim()
    }
}

pub fn kernel_basis(s: &PreSymplecticStructure, p: &[f64]) -> Result<KernelBasis> {
    let m = s.omega.eval_matrix(p)?;
    kernel_of_matrix(&m, s.rank_tol)
}

pub(crate) fn kernel_of_matrix(m: &DMatrix<f64>, rank_tol: f64) -> Result<KernelBasis> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("omega".into()));
    }
    let n = m.ncols();
    let svd = sorted_svd(m);
    let smax = svd.sigma.first().copied().unwrap_or(0.0);
    let rank = svd.sigma.iter().filter(|&&s| s > rank_tol * smax && s > 0.0).count();
    if rank % 2 != 0 {
        return Err(Error::Rank(format!("odd numerical rank {rank} of an antisymmetric matrix")));
    }
    Ok(KernelBasis { rank, basis: svd.v.columns(rank, n - rank).into_owned(), sigma: svd.sigma })
}

pub fn constant_rank_certificate(s: &PreSymplecticStructure, points: &[Vec<f64>]) -> Result<RankCertificate> {
    if points.is_empty() {
        return Err(Error::Invalid("empty point list".into()));
    }
    let bases = sweep::try_map(points.len(), |i| kernel_basis(s, &points[i]))?;
    let coranks: Vec<usize> = bases.iter().map(|b| b.corank()).collect();
    let gaps = bases
        .iter()
        .map(|b| {
            let smax = b.sigma[0].max(1e-300);
            let kept = if b.rank > 0 { b.sigma[b.rank - 1] / smax } else { 0.0 };
            let dropped = b.sigma.get(b.rank).map_or(0.0, |v| v / smax);
            (kept, dropped)
        })
        .collect();
    let offending_point = coranks.iter().position(|&c| c != coranks[0]);
    Ok(RankCertificate { pass: offending_point.is_none(), coranks, gaps, offending_point })
}

/// Kernel frames continued along `points`: each frame is the polar
/// (Procrustes) alignment of the previous one projected into the next kernel.
pub fn smooth_kernel_frame(s: &PreSymplecticStructure, points: &[Vec<f64>]) -> Result<KernelFrame> {
    let cert = constant_rank_certificate(s, points)?;
    if !cert.pass {
        return Err(Error::Rank(format!(
            "kernel dimension changes at point {}",
            cert.offending_point.unwrap_or(0)
        )));
    }
    let r = cert.coranks[0];
    let bases = sweep::try_map(points.len(), |i| kernel_basis(s, &points[i]))?;
    let mut frames: Vec<DMatrix<f64>> = Vec::with_capacity(points.len());
    frames.push(bases[0].basis.clone());
    for i in 1..points.len() {
        let k = &bases[i].basis;
        if r == 0 {
            frames.push(k.clone());
            continue;
        }
        let overlap = k.transpose() * &frames[i - 1];
        let (rot, smin) = polar_factor(&overlap);
        if smin < 1e-3 {
            return Err(Error::Continuation { index: i, overlap: smin });
        }
        frames.push(k * rot);
    }
    Ok(KernelFrame { base_points: points.to_vec(), frames, r })
}

/// Largest `|omega(p) v|` over frame columns, relative to `|omega(p)|`.
pub fn kernel_residual(s: &PreSymplecticStructure, p: &[f64], frame: &DMatrix<f64>) -> Result<f64> {
    let m = s.omega.eval_matrix(p)?;
    let scale = max_abs(&m).max(1e-300);
    Ok(max_abs(&(m * frame)) / scale)
}
