use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the estimation library and the experiment drivers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("degenerate conditioning: marginal density {density:e} at the conditioning point")]
    DegenerateConditioning { density: f64 },

    #[error("truth cache not converged: refinement error {error:e} exceeds {tolerance:e}")]
    TruthNotConverged { error: f64, tolerance: f64 },

    /// The quantity is not defined on this input (e.g. the floor event fails).
    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("undefined statistic: {0}")]
    Undefined(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than a failed computation.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::InvalidArgument(_) | Error::Config(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
