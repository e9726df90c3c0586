//! Pipeline driver library: configuration, stage implementations, and
//! reporting for the advice-cloze benchmark builder.

pub mod config;
pub mod counts;
pub mod report;
pub mod stages;
pub mod util;

use std::path::PathBuf;

/// Stage failures, separated by how the process should exit:
/// config violations exit 3, missing upstream artifacts exit 2,
/// everything else exits 1.
#[derive(Debug)]
pub enum StageError {
    Config(String),
    MissingArtifact {
        artifact: PathBuf,
        produced_by: String,
    },
    Failure(String),
}

impl StageError {
    pub fn failure(message: impl Into<String>) -> Self {
        StageError::Failure(message.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            StageError::Config(_) => 3,
            StageError::MissingArtifact { .. } => 2,
            StageError::Failure(_) => 1,
        }
    }
}

impl std::fmt::Display for StageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StageError::Config(message) => write!(f, "config violation: {message}"),
            StageError::MissingArtifact {
                artifact,
                produced_by,
            } => write!(
                f,
                "missing artifact {}: run the `{produced_by}` stage first",
                artifact.display()
            ),
            StageError::Failure(message) => write!(f, "{message}"),
        }
    }
}

impl std::error::Error for StageError {}
