use std::path::PathBuf;

use crate::grid::Location;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library can report. `exit_code` maps them onto the CLI contract.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field location mismatch: expected {expected:?}, found {found:?}")]
    LocationMismatch { expected: Location, found: Location },

    #[error("field shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("energy model evaluated outside its domain: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("density fell to {value:.3e} at cell ({i}, {j}) in step {step}")]
    Positivity { step: usize, i: usize, j: usize, value: f64 },

    #[error("linear solver did not converge: {iterations} iterations, relative residual {residual:.3e}")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("preconditioner factorisation failed: {0}")]
    Factorisation(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("malformed file {path}: {msg}")]
    Format { path: PathBuf, msg: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::InvalidGrid(_)
            | Error::InvalidParameter(_)
            | Error::LocationMismatch { .. }
            | Error::ShapeMismatch(_) => 2,
            Error::NonConvergence { .. } | Error::Factorisation(_) => 3,
            Error::Positivity { .. } | Error::Domain(_) => 4,
            Error::Io { .. } | Error::Format { .. } => 5,
        }
    }
}
