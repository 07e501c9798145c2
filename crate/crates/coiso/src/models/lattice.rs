//! Periodic cubic lattices: site/link layout, the discrete gradient, the
//! covariant gradient of link fields, plaquette field strength and the Green
//! solver of the (covariant) Laplacian.
//!
//! Layout: site `s = x + n1 (y + n2 z)`; link `l = 3 s + k` points from `s`
//! to `s + e_k`; Lie components are innermost (`index = l * g + c`).
//! Plaquettes use the same layout with the pairs `(1,2), (1,3), (2,3)`.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::su2::{left_mc, left_mc_inverse, left_mc_inverse_derivative, Quat, CHART_RADIUS};
use crate::linalg::{sym_pinv, SymPinv};
use crate::{Error, Result};

pub const PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    pub dims: [usize; 3],
}

impl Grid {
    pub fn new(dims: [usize; 3]) -> Result<Self> {
        if dims.iter().any(|&d| d < 2) {
            return Err(Error::Invalid(format!("grid extents must be >= 2, got {dims:?}")));
        }
        Ok(Grid { dims })
    }

    pub fn sites(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn links(&self) -> usize {
        3 * self.sites()
    }

    pub fn site(&self, x: [usize; 3]) -> usize {
        x[0] + self.dims[0] * (x[1] + self.dims[1] * x[2])
    }

    pub fn coords(&self, s: usize) -> [usize; 3] {
        let [n0, n1, _] = self.dims;
        [s % n0, (s / n0) % n1, s / (n0 * n1)]
    }

    /// Neighbour of `s` one step along direction `k` (0-based), periodic.
    pub fn shift(&self, s: usize, k: usize) -> usize {
        let mut x = self.coords(s);
        x[k] = (x[k] + 1) % self.dims[k];
        self.site(x)
    }

    /// `(tail, head)` sites of link `l`.
    pub fn link_ends(&self, l: usize) -> (usize, usize) {
        let (s, k) = (l / 3, l % 3);
        (s, self.shift(s, k))
    }

    /// The four links of plaquette `q` with orientation signs, in path order
    /// `U_j(x) U_k(x + e_j) U_j(x + e_k)^{-1} U_k(x)^{-1}`.
    pub fn plaquette_links(&self, q: usize) -> [(usize, bool); 4] {
        let (s, (j, k)) = (q / 3, PAIRS[q % 3]);
        [(3 * s + j, true), (3 * self.shift(s, j) + k, true), (3 * self.shift(s, k) + j, false), (3 * s + k, false)]
    }
}

/// Plain forward-difference gradient `D` (`3N x N`) of a scalar lattice field.
pub fn discrete_gradient(grid: &Grid) -> DMatrix<f64> {
    let n = grid.sites();
    let mut d = DMatrix::zeros(3 * n, n);
    for l in 0..3 * n {
        let (x, y) = grid.link_ends(l);
        d[(l, y)] += 1.0;
        d[(l, x)] -= 1.0;
    }
    d
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    U1,
    Su2,
}

impl Group {
    /// Lie algebra dimension.
    pub fn dim(&self) -> usize {
        match self {
            Group::U1 => 1,
            Group::Su2 => 3,
        }
    }

    /// `eps^a_bc` in a Killing-orthonormal basis, flattened `a * g^2 + b * g + c`.
    pub fn structure_constants(&self) -> Vec<f64> {
        match self {
            Group::U1 => vec![0.0],
            Group::Su2 => {
                let mut e = vec![0.0; 27];
                for (a, b, c) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
                    e[a * 9 + b * 3 + c] = 1.0;
                    e[a * 9 + c * 3 + b] = -1.0;
                }
                e
            }
        }
    }

    /// Zero modes of the covariant Laplacian at a generic field.
    pub fn generic_zero_modes(&self) -> usize {
        match self {
            Group::U1 => 1,
            Group::Su2 => 0,
        }
    }

    /// `A(a)` with `(grad psi)_l = A psi_head - A^T psi_tail`.
    pub fn link_block(&self, a: &[f64]) -> DMatrix<f64> {
        match self {
            Group::U1 => DMatrix::from_element(1, 1, 1.0),
            Group::Su2 => m3(&left_mc_inverse(&v3(a))),
        }
    }

    /// `d A / d a_b`.
    pub fn link_block_derivative(&self, a: &[f64], b: usize) -> DMatrix<f64> {
        match self {
            Group::U1 => DMatrix::zeros(1, 1),
            Group::Su2 => m3(&left_mc_inverse_derivative(&v3(a), b)),
        }
    }

    /// Left-trivialization matrix `theta(a)` of a link (`E = theta^{-T} p`).
    pub fn link_frame(&self, a: &[f64]) -> DMatrix<f64> {
        match self {
            Group::U1 => DMatrix::from_element(1, 1, 1.0),
            Group::Su2 => m3(&left_mc(&v3(a))),
        }
    }

    pub fn link_in_domain(&self, a: &[f64]) -> bool {
        match self {
            Group::U1 => true,
            Group::Su2 => v3(a).norm() < CHART_RADIUS,
        }
    }
}

fn v3(a: &[f64]) -> Vector3<f64> {
    Vector3::new(a[0], a[1], a[2])
}

fn m3(m: &Matrix3<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(3, 3, m.as_slice())
}

/// Covariant lattice operators for a given group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeOps {
    pub grid: Grid,
    pub group: Group,
}

impl LatticeOps {
    pub fn g(&self) -> usize {
        self.group.dim()
    }

    /// Number of link coordinates `3 N g`.
    pub fn na(&self) -> usize {
        self.grid.links() * self.g()
    }

    /// Number of site coordinates `N g`.
    pub fn ns(&self) -> usize {
        self.grid.sites() * self.g()
    }

    pub fn link<'a>(&self, a: &'a [f64], l: usize) -> &'a [f64] {
        let g = self.g();
        &a[l * g..(l + 1) * g]
    }

    pub fn in_domain(&self, a: &[f64]) -> bool {
        (0..self.grid.links()).all(|l| self.group.link_in_domain(self.link(a, l)))
    }

    /// Dense covariant gradient `grad(a)` (`na x ns`).
    pub fn gradient_matrix(&self, a: &[f64]) -> DMatrix<f64> {
        let g = self.g();
        let mut m = DMatrix::zeros(self.na(), self.ns());
        for l in 0..self.grid.links() {
            let (x, y) = self.grid.link_ends(l);
            let blk = self.group.link_block(self.link(a, l));
            for i in 0..g {
                for j in 0..g {
                    m[(l * g + i, y * g + j)] += blk[(i, j)];
                    m[(l * g + i, x * g + j)] -= blk[(j, i)];
                }
            }
        }
        m
    }

    /// `grad(a) psi` without forming the matrix.
    pub fn apply_gradient(&self, a: &[f64], psi: &DVector<f64>) -> DVector<f64> {
        let g = self.g();
        let mut out = DVector::zeros(self.na());
        for l in 0..self.grid.links() {
            let (x, y) = self.grid.link_ends(l);
            let blk = self.group.link_block(self.link(a, l));
            let v = &blk * psi.rows(y * g, g) - blk.transpose() * psi.rows(x * g, g);
            out.rows_mut(l * g, g).copy_from(&v);
        }
        out
    }

    /// `grad(a)^T v` (the negative covariant divergence).
    pub fn apply_adjoint(&self, a: &[f64], v: &DVector<f64>) -> DVector<f64> {
        let g = self.g();
        let mut out = DVector::zeros(self.ns());
        for l in 0..self.grid.links() {
            let (x, y) = self.grid.link_ends(l);
            let blk = self.group.link_block(self.link(a, l));
            let vl = v.rows(l * g, g);
            let hy = blk.transpose() * vl;
            let hx = &blk * vl;
            let mut oy = out.rows_mut(y * g, g);
            oy += hy;
            let mut ox = out.rows_mut(x * g, g);
            ox -= hx;
        }
        out
    }

    /// The only non-zero rows (link `l`) of `d grad / d a_i`, `i = l g + b`, applied to `psi`.
    pub fn dgradient_apply(&self, a: &[f64], i: usize, psi: &DVector<f64>) -> DVector<f64> {
        let g = self.g();
        let (l, b) = (i / g, i % g);
        let (x, y) = self.grid.link_ends(l);
        let d = self.group.link_block_derivative(self.link(a, l), b);
        &d * psi.rows(y * g, g) - d.transpose() * psi.rows(x * g, g)
    }

    /// `(d grad / d a_i)^T` applied to a link-block vector `u` (length g), as site field.
    pub fn dgradient_adjoint(&self, a: &[f64], i: usize, u: &DVector<f64>) -> DVector<f64> {
        let g = self.g();
        let (l, b) = (i / g, i % g);
        let (x, y) = self.grid.link_ends(l);
        let d = self.group.link_block_derivative(self.link(a, l), b);
        let mut out = DVector::zeros(self.ns());
        let mut oy = out.rows_mut(y * g, g);
        oy += d.transpose() * u;
        let mut ox = out.rows_mut(x * g, g);
        ox -= &d * u;
        out
    }

    /// Field strength `F = 1/2 log(plaquette)` (`3 N g`), `mu < nu` pairs only.
    pub fn field_strength(&self, a: &[f64]) -> DVector<f64> {
        let g = self.g();
        let nq = self.grid.links();
        let mut f = DVector::zeros(nq * g);
        for q in 0..nq {
            let v = self.plaquette_strength(a, q);
            f.rows_mut(q * g, g).copy_from(&v);
        }
        f
    }

    pub fn plaquette_strength(&self, a: &[f64], q: usize) -> DVector<f64> {
        let links = self.grid.plaquette_links(q);
        match self.group {
            Group::U1 => {
                let s: f64 = links.iter().map(|&(l, fwd)| if fwd { a[l] } else { -a[l] }).sum();
                DVector::from_element(1, 0.5 * s)
            }
            Group::Su2 => {
                let mut w = Quat([1.0, 0.0, 0.0, 0.0]);
                for &(l, fwd) in &links {
                    let u = Quat::exp(&v3(self.link(a, l)));
                    w = w.mul(&if fwd { u } else { u.conj() });
                }
                let s = w.log() * 0.5;
                DVector::from_column_slice(s.as_slice())
            }
        }
    }

    /// Plaquettes containing link `l`.
    pub fn plaquettes_of_link(&self, l: usize) -> Vec<usize> {
        (0..self.grid.links()).filter(|&q| self.grid.plaquette_links(q).iter().any(|&(m, _)| m == l)).collect()
    }

    pub fn laplacian(&self, a: &[f64]) -> DMatrix<f64> {
        let d = self.gradient_matrix(a);
        d.transpose() * &d
    }
}

/// Pseudo-inverse of the covariant Laplacian with a zero-mode budget.
#[derive(Debug, Clone)]
pub struct GreenSolver {
    pub pinv: DMatrix<f64>,
    pub nullity: usize,
    pub kernel: DMatrix<f64>,
}

impl GreenSolver {
    pub fn new(laplacian: &DMatrix<f64>, expected_zero_modes: usize) -> Result<Self> {
        let SymPinv { pinv, nullity, kernel } = sym_pinv(laplacian, 1e-10);
        if nullity > expected_zero_modes {
            return Err(Error::GreenSolve(format!(
                "Laplacian has {nullity} zero modes, expected {expected_zero_modes} (reducible field?)"
            )));
        }
        Ok(GreenSolver { pinv, nullity, kernel })
    }

    /// Solves `Delta x = b_perp` on the complement of the zero modes.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        &self.pinv * b
    }

    /// Component of `b` orthogonal to the zero modes.
    pub fn project_out_zero_modes(&self, b: &DVector<f64>) -> DVector<f64> {
        b - &self.kernel * (self.kernel.transpose() * b)
    }
}

/// Names `prefix(x,y,z,c,k=K)` for link fields, `K` 1-based.
pub fn link_names(prefix: &str, grid: &Grid, g: usize) -> Vec<String> {
    let mut out = Vec::with_capacity(grid.links() * g);
    for l in 0..grid.links() {
        let [x, y, z] = grid.coords(l / 3);
        for c in 0..g {
            out.push(format!("{prefix}({x},{y},{z},{c},k={})", l % 3 + 1));
        }
    }
    out
}

/// Names `prefix(x,y,z,c)` for site fields.
pub fn site_names(prefix: &str, grid: &Grid, g: usize) -> Vec<String> {
    let mut out = Vec::with_capacity(grid.sites() * g);
    for s in 0..grid.sites() {
        let [x, y, z] = grid.coords(s);
        for c in 0..g {
            out.push(format!("{prefix}({x},{y},{z},{c})"));
        }
    }
    out
}

/// Names `prefix(x,y,z,c,jk=JK)` for plaquette fields.
pub fn plaquette_names(prefix: &str, grid: &Grid, g: usize) -> Vec<String> {
    let mut out = Vec::with_capacity(grid.links() * g);
    for q in 0..grid.links() {
        let [x, y, z] = grid.coords(q / 3);
        let (j, k) = PAIRS[q % 3];
        for c in 0..g {
            out.push(format!("{prefix}({x},{y},{z},{c},jk={}{})", j + 1, k + 1));
        }
    }
    out
}
