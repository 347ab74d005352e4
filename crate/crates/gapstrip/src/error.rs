use std::path::PathBuf;

use gapstrip_core::error::{CellConstantsError, Error as CoreError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    /// 2 config, 3 mesh/solver, 4 failed verification.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(CoreError::Geometry(_) | CoreError::InvalidInput(_)) => 2,
            CliError::Core(CoreError::CellConstants(CellConstantsError::CrossMethod { .. })) => 4,
            CliError::Core(_) | CliError::Io { .. } => 3,
            CliError::Verification(_) => 4,
        }
    }
}
