use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point {point:?} lies outside the chart domain")]
    OutsideDomain { point: Vec<f64> },

    #[error("chart mismatch: {0}")]
    ChartMismatch(String),

    #[error("degree overflow: {p} + {q} exceeds chart dimension {dim}")]
    DegreeOverflow { p: usize, q: usize, dim: usize },

    #[error("interior product of a 0-form")]
    InteriorOfFunction,

    #[error("exact derivative requested but none supplied for {0}")]
    MissingExactDerivative(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("matrix is numerically singular (condition number {cond:e})")]
    Singular { cond: f64 },

    #[error("rank failure: {0}")]
    Rank(String),

    #[error("kernel frame cannot be continued at path index {index} (smallest overlap {overlap:e}); possible topology obstruction")]
    Continuation { index: usize, overlap: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("Green solve failed: {0}; perturb the reference field")]
    GreenSolve(String),

    #[error("refused: {0}")]
    Refused(String),

    #[error("parametrization leaves the constraint set: residual {residual:e} at point {index}")]
    OffConstraintSurface { index: usize, residual: f64 },

    #[error("structure degenerate along trajectory at t = {t}: {point:?}")]
    DegenerateAlongTrajectory { t: f64, point: Vec<f64> },

    #[error("syntax error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
