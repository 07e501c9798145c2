//! Pre-symplectic Hamiltonian systems: primary constraints `i_V dH`, one
//! step of the constraint algorithm on a user-supplied surface, and RK4
//! bracket flow.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::geomcore::{pullback_form, pullback_scalar, Bivector, Chart, ChartMap, DiffBackend, ScalarField};
use crate::linalg::null_space;
use crate::presympl::{smooth_kernel_frame, PreSymplecticStructure};
use crate::{sweep, Error, Result};

#[derive(Clone, Debug)]
pub struct HamiltonianSystem {
    pub structure: PreSymplecticStructure,
    pub h: ScalarField,
}

impl HamiltonianSystem {
    pub fn new(structure: PreSymplecticStructure, h: ScalarField) -> Result<Self> {
        structure.chart().ensure_same(h.chart(), "Hamiltonian")?;
        Ok(HamiltonianSystem { structure, h })
    }

    pub fn chart(&self) -> &Arc<Chart> {
        self.structure.chart()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstraintRow {
    pub label: String,
    /// `i_V dH` at each sample point.
    pub values: Vec<f64>,
    pub max_abs: f64,
    pub is_constraint: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstraintReport {
    /// One row per kernel direction; `is_constraint` marks the ones above `tol`.
    pub constraints: Vec<ConstraintRow>,
    pub stabilized: bool,
    pub iterations: usize,
    /// Rank of the stacked (direction x point) residual matrix.
    pub stacked_rank: usize,
    pub tol: f64,
}

impl ConstraintReport {
    pub fn active(&self) -> impl Iterator<Item = &ConstraintRow> {
        self.constraints.iter().filter(|c| c.is_constraint)
    }

    pub fn count(&self) -> usize {
        self.active().count()
    }

    pub fn row(&self, label: &str) -> Option<&ConstraintRow> {
        self.constraints.iter().find(|c| c.label == label)
    }
}

/// Kernel frames at each point with labels. When the kernel is spanned by
/// the same coordinate axes everywhere, those axes are used and labelled by
/// coordinate name; otherwise a continued orthonormal frame is used.
pub fn kernel_directions(s: &PreSymplecticStructure, points: &[Vec<f64>]) -> Result<(Vec<DMatrix<f64>>, Vec<String>)> {
    let kf = smooth_kernel_frame(s, points)?;
    let n = s.dim();
    if kf.r == 0 {
        return Ok((kf.frames, Vec::new()));
    }
    let axes_of = |f: &DMatrix<f64>| -> Option<Vec<usize>> {
        let proj = f * f.transpose();
        let mut axes = Vec::new();
        for i in 0..n {
            let d = proj[(i, i)];
            if d > 1.0 - 1e-9 {
                axes.push(i);
            } else if d > 1e-9 {
                return None;
            }
        }
        (axes.len() == kf.r).then_some(axes)
    };
    let first = axes_of(&kf.frames[0]);
    if let Some(axes) = first.filter(|a| kf.frames.iter().all(|f| axes_of(f).as_ref() == Some(a))) {
        let mut e = DMatrix::zeros(n, kf.r);
        for (j, &i) in axes.iter().enumerate() {
            e[(i, j)] = 1.0;
        }
        let labels = axes.iter().map(|&i| s.chart().names()[i].clone()).collect();
        return Ok((vec![e; points.len()], labels));
    }
    let labels = (0..kf.r).map(|j| format!("kernel[{j}]")).collect();
    Ok((kf.frames, labels))
}

/// `i_V dH` for explicitly supplied frames (one `n x r` matrix per point).
pub fn constraints_with_frames(
    sys: &HamiltonianSystem,
    points: &[Vec<f64>],
    frames: &[DMatrix<f64>],
    labels: &[String],
    backend: &DiffBackend,
    tol: f64,
) -> Result<ConstraintReport> {
    if frames.len() != points.len() {
        return Err(Error::Dimension("one frame per point required".into()));
    }
    let r = labels.len();
    let vals = sweep::try_map(points.len(), |i| -> Result<Vec<f64>> {
        let g = backend.gradient(&sys.h, &points[i])?;
        Ok((frames[i].transpose() * g).iter().copied().collect())
    })?;
    let stacked = DMatrix::from_fn(r, points.len(), |j, i| vals[i][j]);
    let stacked_rank = if r == 0 || points.is_empty() {
        0
    } else {
        let scale = stacked.amax();
        if scale < tol {
            0
        } else {
            null_space(&stacked.transpose(), 1e-9).0
        }
    };
    let constraints: Vec<ConstraintRow> = labels
        .iter()
        .enumerate()
        .map(|(j, l)| {
            let values: Vec<f64> = vals.iter().map(|v| v[j]).collect();
            let m = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            ConstraintRow { label: l.clone(), values, max_abs: m, is_constraint: !(m < tol) }
        })
        .collect();
    let stabilized = constraints.iter().all(|c| !c.is_constraint);
    Ok(ConstraintReport { constraints, stabilized, iterations: 0, stacked_rank, tol })
}

/// Primary constraints: `i_V dH` along every kernel direction.
pub fn primary_constraints(
    sys: &HamiltonianSystem,
    points: &[Vec<f64>],
    backend: &DiffBackend,
    tol: f64,
) -> Result<ConstraintReport> {
    let (frames, labels) = kernel_directions(&sys.structure, points)?;
    constraints_with_frames(sys, points, &frames, &labels, backend, tol)
}

/// One constraint-algorithm step: verifies that `param` lands inside the
/// current constraint set, pulls `omega` and `H` back through it and recomputes
/// the constraints there.
pub fn stabilization_step(
    sys: &HamiltonianSystem,
    previous: &ConstraintReport,
    param: &ChartMap,
    points: &[Vec<f64>],
    backend: &DiffBackend,
    tol: f64,
) -> Result<(ConstraintReport, HamiltonianSystem)> {
    sys.chart().ensure_same(param.target(), "parametrization target")?;
    let images: Vec<Vec<f64>> = sweep::try_map(points.len(), |i| Ok(param.apply(&points[i])?.as_slice().to_vec()))?;
    let here = primary_constraints(sys, &images, backend, tol)?;
    for row in &here.constraints {
        if let Some((idx, v)) = row.values.iter().enumerate().find(|(_, v)| !(v.abs() < tol)) {
            return Err(Error::OffConstraintSurface { index: idx, residual: v.abs() });
        }
    }
    let omega = pullback_form(&sys.structure.omega, param)?;
    let s = PreSymplecticStructure::new(omega)?.with_rank_tol(sys.structure.rank_tol);
    let h = pullback_scalar(&sys.h, param)?;
    let next = HamiltonianSystem::new(s, h)?;
    let mut report = primary_constraints(&next, points, backend, tol)?;
    report.iterations = previous.iterations + 1;
    Ok((report, next))
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub names: Vec<String>,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub energies: Vec<f64>,
}

impl Trajectory {
    pub fn max_drift(&self) -> f64 {
        let e0 = self.energies.first().copied().unwrap_or(0.0);
        self.energies.iter().fold(0.0, |a, e| a.max((e - e0).abs()))
    }

    /// CSV with header `t,<coordinate names>`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for n in &self.names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (t, x) in self.times.iter().zip(&self.states) {
            out.push_str(&format!("{t:.6}"));
            for v in x {
                out.push_str(&format!(",{v:.12e}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Classical RK4 on `x' = Lambda(x) dH(x)`, sampled every `dt`.
pub fn solve_dynamics(
    lambda: &Bivector,
    h: &ScalarField,
    x0: &[f64],
    t_end: f64,
    dt: f64,
    backend: &DiffBackend,
) -> Result<Trajectory> {
    lambda.chart().ensure_same(h.chart(), "dynamics")?;
    if !(dt > 0.0 && t_end >= 0.0) {
        return Err(Error::Invalid("dt must be positive and t_end non-negative".into()));
    }
    let steps = (t_end / dt).round() as usize;
    let rhs = |x: &[f64], t: f64| -> Result<nalgebra::DVector<f64>> {
        let wrap = |_| Error::DegenerateAlongTrajectory { t, point: x.to_vec() };
        let l = lambda.eval(x).map_err(wrap)?;
        let g = backend.gradient(h, x).map_err(wrap)?;
        Ok(l * g)
    };
    let add = |x: &[f64], k: &nalgebra::DVector<f64>, c: f64| -> Vec<f64> {
        x.iter().zip(k.iter()).map(|(a, b)| a + c * b).collect()
    };
    let mut x = x0.to_vec();
    let mut traj = Trajectory {
        names: lambda.chart().names().to_vec(),
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        energies: Vec::with_capacity(steps + 1),
    };
    traj.times.push(0.0);
    traj.energies.push(h.eval(&x)?);
    traj.states.push(x.clone());
    for k in 0..steps {
        let t = k as f64 * dt;
        let k1 = rhs(&x, t)?;
        let k2 = rhs(&add(&x, &k1, 0.5 * dt), t)?;
        let k3 = rhs(&add(&x, &k2, 0.5 * dt), t)?;
        let k4 = rhs(&add(&x, &k3, dt), t)?;
        let incr = (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        x = add(&x, &incr, 1.0);
        let tn = (k + 1) as f64 * dt;
        let e = h.eval(&x).map_err(|_| Error::DegenerateAlongTrajectory { t: tn, point: x.clone() })?;
        traj.times.push(tn);
        traj.energies.push(e);
        traj.states.push(x.clone());
    }
    Ok(traj)
}
