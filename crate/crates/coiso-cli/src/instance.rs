//! Uniform view of the three built-in models.

use coiso::connection::Connection;
use coiso::geomcore::ChartMap;
use coiso::models::ed::{build_lattice_ed, EdModel};
use coiso::models::lattice::{Grid, Group};
use coiso::models::monopole::{build_monopole, MonopoleModel};
use coiso::models::ym::{build_lattice_ym, YmModel};
use coiso::obs::Registry;
use coiso::pca::HamiltonianSystem;
use coiso::presympl::PreSymplecticStructure;
use coiso::sampling::{rng, uniform_vec};

use crate::config::{ModelKind, RunConfig};
use crate::CliError;

/// Seed of the reference field for lattice Yang-Mills.
const YM_REFERENCE_SEED: u64 = 11;

enum Sampler {
    Monopole(MonopoleModel),
    Ed(EdModel),
    Ym(YmModel),
}

pub struct Instance {
    pub kind: ModelKind,
    pub structure: PreSymplecticStructure,
    pub connection: Connection,
    pub observables: Registry,
    /// Hamiltonian system for the constraint algorithm, if the model has one.
    pub system: Option<HamiltonianSystem>,
    /// Constraint-surface parametrization into the system chart.
    pub param: Option<ChartMap>,
    sampler: Sampler,
}

impl Instance {
    /// `radial` adds the `(r, pr)` factor and the Hamiltonian to the monopole.
    pub fn build(cfg: &RunConfig, radial: bool) -> Result<Self, CliError> {
        let backend = cfg.backend.backend();
        let grid = || Grid::new(cfg.grid()).map_err(CliError::from);
        Ok(match cfg.model {
            ModelKind::Monopole => {
                let b = build_monopole(cfg.n(), radial)?;
                Instance {
                    kind: cfg.model,
                    structure: b.structure,
                    connection: b.connection.with_backend(backend),
                    observables: b.observables,
                    system: b.system,
                    param: None,
                    sampler: Sampler::Monopole(b.model),
                }
            }
            ModelKind::LatticeEd => {
                let b = build_lattice_ed(grid()?)?;
                Instance {
                    kind: cfg.model,
                    structure: b.structure,
                    connection: b.connection.with_backend(backend),
                    observables: b.observables,
                    system: None,
                    param: None,
                    sampler: Sampler::Ed(b.model),
                }
            }
            ModelKind::LatticeYm => {
                let b = build_lattice_ym(grid()?, cfg.group(), YM_REFERENCE_SEED)?;
                Instance {
                    kind: cfg.model,
                    structure: b.structure,
                    connection: b.connection.with_backend(backend),
                    observables: b.observables,
                    system: Some(b.system),
                    param: Some(b.param),
                    sampler: Sampler::Ym(b.model),
                }
            }
        })
    }

    /// The abelian Yang-Mills system on the same grid; electrodynamics has
    /// no separate slice Hamiltonian.
    pub fn abelian_system(cfg: &RunConfig) -> Result<Self, CliError> {
        let b = build_lattice_ym(Grid::new(cfg.grid())?, Group::U1, YM_REFERENCE_SEED)?;
        Ok(Instance {
            kind: cfg.model,
            structure: b.structure,
            connection: b.connection.with_backend(cfg.backend.backend()),
            observables: b.observables,
            system: Some(b.system),
            param: Some(b.param),
            sampler: Sampler::Ym(b.model),
        })
    }

    pub fn base_points(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        match &self.sampler {
            Sampler::Monopole(m) => m.sample_points(count, seed),
            Sampler::Ed(m) => m.sample_points(count, seed),
            Sampler::Ym(m) => m.sample_points(count, seed),
        }
    }

    /// Points of the system chart, when it differs from the base chart.
    pub fn system_points(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        match &self.sampler {
            Sampler::Ym(m) => m.sample_full_points(count, seed),
            _ => self.base_points(count, seed),
        }
    }

    /// Base points with `mu` uniform in `[-0.5, 0.5]^r` appended.
    pub fn enlarged_points(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let r = self.connection.r();
        let mut g = rng(seed ^ 0x6d75);
        self.base_points(count, seed)
            .into_iter()
            .map(|mut x| {
                x.extend(uniform_vec(&mut g, r, -0.5, 0.5));
                x
            })
            .collect()
    }
}
