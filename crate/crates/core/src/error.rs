use thiserror::Error;

/// Errors raised by grids, solvers, observables and scenario orchestration.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("axis {axis} out of range for a {dim}D grid")]
    AxisOutOfRange { axis: usize, dim: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("field has {got} samples, grid has {expected} nodes")]
    SampleCount { expected: usize, got: usize },

    #[error("non-finite sample at node {0}")]
    NonFinite(usize),

    #[error("invalid constants: {0}")]
    InvalidConstants(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("tridiagonal solve broke down at pivot row {row} (step {step})")]
    SolverBreakdown { step: usize, row: usize },

    #[error("stability guard violated: dt = {dt} exceeds 0.5*dx/c = {bound}")]
    StabilityGuard { dt: f64, bound: f64 },

    #[error("degenerate leapfrog coefficient at node {node} (step {step})")]
    DegenerateCoefficient { step: usize, node: usize },

    #[error("{what}: imaginary residue {residue:e} exceeds tolerance")]
    NotReal { what: &'static str, residue: f64 },

    #[error("snapshots are not equally spaced in time")]
    UnequalSpacing,

    #[error("need at least {needed} snapshots, got {got}")]
    TooFewSnapshots { needed: usize, got: usize },

    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
