//! Staged pipeline driver: config, in-memory stage logic and the
//! file-based stage runner behind the `xmodal` binary.

pub mod config;
pub mod pipeline;
pub mod run;

use std::path::PathBuf;

/// Stage failures, each mapped to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum StageError {
    #[error("config error: {0}")]
    Config(String),
    #[error("missing artifact: {}", .0.display())]
    MissingArtifact(PathBuf),
    #[error(transparent)]
    Runtime(#[from] anyhow::Error),
}

impl StageError {
    pub fn exit_code(&self) -> i32 {
        match self {
            StageError::Config(_) => 2,
            StageError::MissingArtifact(_) => 3,
            StageError::Runtime(_) => 4,
        }
    }
}

impl From<xmodal_core::Error> for StageError {
    fn from(e: xmodal_core::Error) -> Self {
        match e {
            xmodal_core::Error::Config(m) => StageError::Config(m),
            other => StageError::Runtime(other.into()),
        }
    }
}
