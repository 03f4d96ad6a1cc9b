use std::path::PathBuf;

use qcnn::QcnnError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or an invalid configuration.
    #[error("{0}")]
    Config(String),

    #[error("data file {}: {message}", path.display())]
    Data { path: PathBuf, message: String },

    #[error("cannot write {}: {source}", path.display())]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] QcnnError),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    /// 2 usage/config, 3 missing or unreadable data, 4 numerical invariant,
    /// 1 anything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data { .. } => 3,
            CliError::Output { .. } => 1,
            CliError::Core(e) => match e {
                QcnnError::Argument(_) | QcnnError::Validation(_) => 2,
                QcnnError::Format { .. } | QcnnError::Io { .. } => 3,
                QcnnError::Invariant(_) => 4,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
