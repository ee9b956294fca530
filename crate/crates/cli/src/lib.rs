//! Pipeline orchestration for the `darkspan` CLI: configuration, staged
//! execution with digest-keyed caching, and report emission.

pub mod config;
pub mod reports;
pub mod stages;

pub use config::RunConfig;
pub use stages::{Pipeline, Stage};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Configuration problems; the CLI exits with status 2 and the message
    /// names the offending key.
    #[error("config error: {key}: {message}")]
    Config { key: String, message: String },
    /// A stage failed; exit status 1 with the stage name in the message.
    #[error("stage {stage} failed: {message}")]
    Stage { stage: String, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Stage { .. } => 1,
        }
    }

    pub fn stage(stage: &str, message: impl std::fmt::Display) -> CliError {
        CliError::Stage {
            stage: stage.to_string(),
            message: message.to_string(),
        }
    }
}
