use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, QcnnError>;

#[derive(Debug, Error)]
pub enum QcnnError {
    /// A caller supplied an argument outside the operation's domain.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A constructed object (channel, profile, circuit) failed a physicality
    /// or consistency check.
    #[error("validation failed: {0}")]
    Validation(String),

    /// Malformed input file. `location` is a byte offset or row number.
    #[error("{path}: format error at {location}: {message}")]
    Format {
        path: String,
        location: String,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// An internal numerical invariant was violated (non-unit norm, non-PSD
    /// density matrix, ...).
    #[error("numerical invariant violated: {0}")]
    Invariant(String),
}

impl QcnnError {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        QcnnError::Argument(msg.into())
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        QcnnError::Validation(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        QcnnError::Io {
            path: path.into(),
            source,
        }
    }
}
