//! Command line, chat REPL and HTTP service for the safety-codesign engine.

pub mod commands;
pub mod config;
pub mod server;

use codesign_core::{AnalysisError, ModelError, MutationError};
use thiserror::Error;

pub use commands::run;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Model(#[from] ModelError),

    #[error("{0}")]
    Analysis(String),

    #[error("{0}")]
    Backend(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Model(_) => 2,
            CliError::Analysis(_) => 3,
            CliError::Backend(_) => 4,
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        CliError::Analysis(e.to_string())
    }
}

impl From<MutationError> for CliError {
    fn from(e: MutationError) -> Self {
        match e {
            MutationError::Model(e) => CliError::Model(e),
            other => CliError::Analysis(other.to_string()),
        }
    }
}
