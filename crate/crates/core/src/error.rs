use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum BanditError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("rejection sampling gave up after {attempts} attempts")]
    SamplingFailure { attempts: u64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: row {row}: {message}")]
    Dataset {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl BanditError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        BanditError::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        BanditError::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error stems from user input (flags, config, arguments)
    /// rather than a failure while running.
    pub fn is_usage_error(&self) -> bool {
        matches!(
            self,
            BanditError::InvalidArgument(_) | BanditError::Config(_)
        )
    }
}

pub type Result<T, E = BanditError> = std::result::Result<T, E>;
