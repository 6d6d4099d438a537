//! Files, formats and the command-line driver around `fairscope-core`.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod formats;
pub mod report;

pub use config::PipelineConfig;
pub use error::{AppError, AppResult};
