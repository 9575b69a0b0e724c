use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Inconsistent or invalid input data (dimensions, indices, duplicates).
    #[error("data error: {0}")]
    Data(String),

    #[error("duplicate entry at ({row}, {col}); remove the repeated coordinate")]
    DuplicateEntry { row: usize, col: usize },

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    /// Parse failure in a text file, with a one-line remedy.
    #[error("{}:{line}: {msg}; {remedy}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
        remedy: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("matrix is not positive definite (pivot {pivot} failed after jitter)")]
    NotPositiveDefinite { pivot: usize },

    #[error("non-finite latent value at iteration {iteration}, mode {mode}, entity {entity}")]
    NonFinite {
        iteration: u64,
        mode: usize,
        entity: usize,
    },

    #[error("invalid distribution parameter: {0}")]
    Domain(String),

    #[error("snapshot error in {}: {msg}", path.display())]
    Snapshot { path: PathBuf, msg: String },

    #[error("{}: {source}", path.display())]
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

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::NotPositiveDefinite { .. } | Error::NonFinite { .. } | Error::Domain(_) => 4,
            _ => 3,
        }
    }
}
