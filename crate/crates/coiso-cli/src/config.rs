//! Run configuration: JSON file merged with command-line overrides.

use std::path::{Path, PathBuf};

use coiso::models::lattice::Group;
use coiso::DiffBackend;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Monopole,
    LatticeEd,
    LatticeYm,
}

impl ModelKind {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "monopole" => Ok(ModelKind::Monopole),
            "lattice-ed" => Ok(ModelKind::LatticeEd),
            "lattice-ym" => Ok(ModelKind::LatticeYm),
            _ => Err(CliError::Config(format!("unknown model `{s}` (monopole, lattice-ed, lattice-ym)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Monopole => "monopole",
            ModelKind::LatticeEd => "lattice-ed",
            ModelKind::LatticeYm => "lattice-ym",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<[usize; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<Group>,
}

/// Tolerance overrides; `None` means the backend or command default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curvature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closed: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jacobi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendMode {
    /// Central differences, exact hooks used where models supply them.
    Central,
    /// Central differences everywhere.
    Fd,
    /// Exact hooks only.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub mode: BackendMode,
    pub h: f64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig { mode: BackendMode::Central, h: 1e-5 }
    }
}

impl BackendConfig {
    pub fn backend(&self) -> DiffBackend {
        match self.mode {
            BackendMode::Central => DiffBackend::central(self.h),
            BackendMode::Fd => DiffBackend::fd_only(self.h),
            BackendMode::Exact => DiffBackend::exact(),
        }
    }
}

fn default_points() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelKind,
    #[serde(default)]
    pub params: Params,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tol: Tolerances,
    #[serde(default)]
    pub backend: BackendConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

/// Partial config as read from a file; every key optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub model: Option<ModelKind>,
    #[serde(default)]
    pub params: Params,
    pub points: Option<usize>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub tol: Tolerances,
    pub backend: Option<BackendConfig>,
    pub output: Option<PathBuf>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))
    }
}

/// Command-line overrides, applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub model: Option<String>,
    pub n: Option<f64>,
    pub grid: Option<String>,
    pub group: Option<String>,
    pub points: Option<usize>,
    pub seed: Option<u64>,
    pub tol: Tolerances,
    pub backend: Option<String>,
    pub h: Option<f64>,
    pub output: Option<PathBuf>,
}

pub fn parse_grid(s: &str) -> Result<[usize; 3], CliError> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || CliError::Config(format!("grid `{s}` must be three positive integers a,b,c"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let mut out = [0usize; 3];
    for (o, p) in out.iter_mut().zip(&parts) {
        *o = p.parse().map_err(|_| bad())?;
    }
    Ok(out)
}

pub fn parse_group(s: &str) -> Result<Group, CliError> {
    match s {
        "u1" => Ok(Group::U1),
        "su2" => Ok(Group::Su2),
        _ => Err(CliError::Config(format!("unknown group `{s}` (u1, su2)"))),
    }
}

impl RunConfig {
    pub fn resolve(file: Option<ConfigFile>, o: Overrides) -> Result<Self, CliError> {
        let f = file.unwrap_or_default();
        let model = match &o.model {
            Some(m) => ModelKind::parse(m)?,
            None => f.model.ok_or_else(|| CliError::Config("no model given (--model or config `model`)".into()))?,
        };
        let mut params = f.params;
        if let Some(n) = o.n {
            params.n = Some(n);
        }
        if let Some(g) = &o.grid {
            params.grid = Some(parse_grid(g)?);
        }
        if let Some(g) = &o.group {
            params.group = Some(parse_group(g)?);
        }
        let mut tol = f.tol;
        for (slot, v) in [
            (&mut tol.rank, o.tol.rank),
            (&mut tol.curvature, o.tol.curvature),
            (&mut tol.closed, o.tol.closed),
            (&mut tol.jacobi, o.tol.jacobi),
            (&mut tol.drift, o.tol.drift),
        ] {
            if v.is_some() {
                *slot = v;
            }
        }
        let mut backend = f.backend.unwrap_or_default();
        if let Some(m) = &o.backend {
            backend.mode = match m.as_str() {
                "central" => BackendMode::Central,
                "fd" => BackendMode::Fd,
                "exact" => BackendMode::Exact,
                _ => return Err(CliError::Config(format!("unknown backend `{m}` (central, fd, exact)"))),
            };
        }
        if let Some(h) = o.h {
            backend.h = h;
        }
        let cfg = RunConfig {
            model,
            params,
            points: o.points.or(f.points).unwrap_or_else(default_points),
            seed: o.seed.or(f.seed).unwrap_or(0),
            tol,
            backend,
            output: o.output.or(f.output),
        };
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), CliError> {
        if self.points == 0 {
            return Err(CliError::Config("points must be at least 1".into()));
        }
        if !(self.backend.h > 0.0 && self.backend.h.is_finite()) {
            return Err(CliError::Config("backend step h must be positive".into()));
        }
        if let Some(g) = self.params.grid {
            if g.iter().any(|&d| d < 2) {
                return Err(CliError::Config("every grid extent must be at least 2".into()));
            }
        }
        if let Some(n) = self.params.n {
            if !n.is_finite() {
                return Err(CliError::Config("n must be finite".into()));
            }
        }
        for t in [self.tol.rank, self.tol.curvature, self.tol.closed, self.tol.jacobi, self.tol.drift].into_iter().flatten() {
            if !(t > 0.0) {
                return Err(CliError::Config("tolerances must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> f64 {
        self.params.n.unwrap_or(1.0)
    }

    pub fn grid(&self) -> [usize; 3] {
        self.params.grid.unwrap_or(match self.model {
            ModelKind::LatticeYm => [2, 2, 2],
            _ => [3, 3, 3],
        })
    }

    pub fn group(&self) -> Group {
        self.params.group.unwrap_or(Group::Su2)
    }
}
