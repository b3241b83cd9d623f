//! Experiment driver: configuration files, initial-data recipes,
//! simulation runs with CSV diagnostics, refinement studies and tableau
//! verification.

pub mod config;
pub mod converge;
pub mod init;
pub mod output;
pub mod run;
pub mod verify;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("solver failed at step {step}: {source}")]
    Solver { step: usize, source: savgl::Error },

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
}

impl CliError {
    /// Process exit status: 2 configuration, 3 solver, 4 verification.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Solver { .. } => 3,
            CliError::Verification(_) => 4,
        }
    }

    pub(crate) fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Io { context, source }
    }
}

pub type CliResult<T> = Result<T, CliError>;
