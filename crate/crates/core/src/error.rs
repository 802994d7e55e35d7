use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("electrodes {first} and {second} {reason}")]
    ElectrodeConflict {
        first: usize,
        second: usize,
        reason: &'static str,
    },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("solver diverged after {iterations} iterations (non-finite potential)")]
    Divergence { iterations: usize },

    #[error("cell not solved")]
    NotSolved,

    #[error("{what} index {index} out of range (limit {limit})")]
    OutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("dimension mismatch: header declares {expected} values, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("malformed document: {0}")]
    Malformed(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Malformed(err.to_string())
    }
}
