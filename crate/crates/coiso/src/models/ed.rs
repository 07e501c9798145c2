//! Electrodynamics on a periodic lattice, on the Gauss-law surface.
//!
//! Chart: link potentials `a` and coefficients `c` of the momentum in an
//! orthonormal basis `Q` of `ker D^T`, so `p = Q c`. The kernel of `omega` is
//! spanned by gradients `(D psi, 0)` and the Coulomb connection has the
//! constant forms `psi^T Delta^+ D^T`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::lattice::{discrete_gradient, link_names, GreenSolver, Grid};
use crate::connection::Connection;
use crate::geomcore::{AltTensor, Chart, KForm, ScalarField};
use crate::linalg::{null_space, range_basis};
use crate::obs::Registry;
use crate::presympl::PreSymplecticStructure;
use crate::sampling::{rng, uniform_vec};
use crate::Result;

#[derive(Debug, Clone)]
pub struct EdModel {
    pub grid: Grid,
    pub chart: Arc<Chart>,
    /// Discrete gradient `D` (`3N x N`).
    pub d: DMatrix<f64>,
    /// Orthonormal basis of `ker D^T` (`3N x m`).
    pub q: DMatrix<f64>,
    /// Orthonormal basis of the non-constant site fields (`N x (N-1)`).
    pub psi: DMatrix<f64>,
    pub green: GreenSolver,
}

pub struct EdBuild {
    pub model: EdModel,
    pub structure: PreSymplecticStructure,
    pub connection: Connection,
    pub observables: Registry,
}

impl EdModel {
    pub fn na(&self) -> usize {
        self.d.nrows()
    }

    pub fn m(&self) -> usize {
        self.q.ncols()
    }

    pub fn dim(&self) -> usize {
        self.na() + self.m()
    }

    pub fn momentum(&self, x: &[f64]) -> DVector<f64> {
        &self.q * DVector::from_column_slice(&x[self.na()..])
    }

    pub fn sample_points(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut g = rng(seed);
        (0..count).map(|_| uniform_vec(&mut g, self.dim(), -1.0, 1.0)).collect()
    }
}

pub fn build_lattice_ed(grid: Grid) -> Result<EdBuild> {
    let d = discrete_gradient(&grid);
    let dt = d.transpose();
    let (_, q, _) = null_space(&dt, 1e-10);
    let psi = range_basis(&dt, 1e-10);
    let green = GreenSolver::new(&(&dt * &d), 1)?;
    let (na, m) = (d.nrows(), q.ncols());
    let mut names = link_names("a", &grid, 1);
    names.extend((0..m).map(|i| format!("c{i}")));
    let chart = Chart::new(names)?;
    let model = EdModel { grid, chart: chart.clone(), d, q, psi, green };
    let n = model.dim();

    let mut om = DMatrix::zeros(n, n);
    for i in 0..na {
        for j in 0..m {
            om[(i, na + j)] = -model.q[(i, j)];
            om[(na + j, i)] = model.q[(i, j)];
        }
    }
    let structure = PreSymplecticStructure::new(KForm::constant(chart.clone(), AltTensor::from_matrix(&om)))?;

    let r = model.psi.ncols();
    let mut frame = DMatrix::zeros(n, r);
    frame.view_mut((0, 0), (na, r)).copy_from(&(&model.d * &model.psi));
    let mut forms = DMatrix::zeros(r, n);
    forms.view_mut((0, 0), (r, na)).copy_from(&(model.psi.transpose() * &model.green.pinv * model.d.transpose()));
    let connection = Connection::new(chart.clone(), r, move |_| Ok(frame.clone()), move |_| Ok(forms.clone()))
        .with_exact_dforms(move |_| Ok(vec![DMatrix::zeros(n, n); r]));

    let mut observables = Registry::new();
    for (i, name) in link_names("p", &grid, 1).into_iter().enumerate() {
        let row: DVector<f64> = model.q.row(i).transpose();
        let mut grad = DVector::zeros(n);
        grad.rows_mut(na, m).copy_from(&row);
        observables.insert(
            name,
            ScalarField::new(chart.clone(), move |x| row.dot(&DVector::from_column_slice(&x[na..])))
                .with_gradient(move |_| grad.clone()),
        )?;
    }
    Ok(EdBuild { model, structure, connection, observables })
}
