//! Command layer of the `coiso` binary: configuration, model instances,
//! the five commands and the JSON report.

pub mod commands;
pub mod config;
pub mod instance;
pub mod report;

use thiserror::Error;

/// Failures with their process exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("certification failure: {0}")]
    Certification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Certification(_) => 2,
            CliError::Config(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl From<coiso::Error> for CliError {
    fn from(e: coiso::Error) -> Self {
        use coiso::Error as E;
        let msg = e.to_string();
        match e {
            E::Singular { .. }
            | E::NonFinite(_)
            | E::DegenerateAlongTrajectory { .. }
            | E::GreenSolve(_)
            | E::Continuation { .. }
            | E::Rank(_)
            | E::OutsideDomain { .. } => CliError::Numerical(msg),
            E::Refused(_) | E::OffConstraintSurface { .. } => CliError::Certification(msg),
            _ => CliError::Config(msg),
        }
    }
}

/// Process exit code for a passing run.
pub const EXIT_OK: i32 = 0;
/// Exit code when every stage ran but a certificate failed.
pub const EXIT_CERTIFICATION: i32 = 2;
