use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = AppError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum AppError {
    #[error(transparent)]
    Core(#[from] entswap_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Parse { path: PathBuf, reason: String },
    #[error("configuration: {0}")]
    Config(String),
}

impl AppError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, reason: impl std::fmt::Display) -> Self {
        AppError::Parse {
            path: path.into(),
            reason: reason.to_string(),
        }
    }

    /// 3 for numerical non-convergence, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Core(entswap_core::Error::NonConvergence(_)) => 3,
            _ => 2,
        }
    }
}
