use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid labels: {0}")]
    InvalidLabels(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("total strength 2mu is zero; modularity is undefined")]
    ZeroStrength,

    #[error("non-finite entry at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error(
        "eigensolver did not converge after {restarts} restarts \
         ({converged} of {wanted} pairs converged, best residuals {residuals:?})"
    )]
    NoConvergence {
        restarts: usize,
        converged: usize,
        wanted: usize,
        residuals: Vec<f64>,
    },

    #[error("instance too large for exhaustive search: {0}")]
    TooLarge(String),

    #[error("basis cache mismatch: {0}")]
    CacheMismatch(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
