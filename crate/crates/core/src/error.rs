use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = ErasError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum ErasError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}:{line}: {message}")]
    Parse {
        file: PathBuf,
        line: usize,
        message: String,
    },

    #[error("empty split: {0}")]
    EmptySplit(PathBuf),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("{0}")]
    Search(String),
}

impl ErasError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ErasError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            ErasError::Config(_) | ErasError::InvalidArgument(_) => 1,
            ErasError::Io { .. }
            | ErasError::Parse { .. }
            | ErasError::EmptySplit(_)
            | ErasError::Dimension(_)
            | ErasError::Checkpoint(_) => 2,
            ErasError::NonFinite(_) | ErasError::Search(_) => 3,
        }
    }
}
