use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AppError {
    #[error(transparent)]
    Core(#[from] fairscope_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("corrupt file {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },
    #[error("{0}")]
    Usage(String),
}

impl AppError {
    /// 2 for usage, configuration and input problems, 3 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Core(fairscope_core::Error::TrainingDiverged { .. }) => 3,
            _ => 2,
        }
    }

    pub fn io(path: &Path) -> impl FnOnce(std::io::Error) -> AppError + '_ {
        move |source| AppError::Io { path: path.to_path_buf(), source }
    }

    pub fn json(path: &Path) -> impl FnOnce(serde_json::Error) -> AppError + '_ {
        move |source| AppError::Json { path: path.to_path_buf(), source }
    }

    pub fn corrupt(path: &Path, reason: impl Into<String>) -> AppError {
        AppError::Corrupt { path: path.to_path_buf(), reason: reason.into() }
    }
}

pub type AppResult<T> = Result<T, AppError>;
