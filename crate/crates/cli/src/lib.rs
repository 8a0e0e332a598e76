//! Command implementations behind the `lagflow` binary.
//!
//! Exit codes: 0 success, 1 configuration/usage/IO error, 2 solver failure
//! (J collapse, non-finite state, non-contraction), 3 failed certificate.

pub mod commands;
pub mod config;
pub mod store;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("solver failure: {0}")]
    Solver(lagflow::Error),
    #[error("certificate failed: {0}")]
    Verdicts(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Solver(_) => 2,
            CliError::Verdicts(_) => 3,
        }
    }
}

impl From<lagflow::Error> for CliError {
    fn from(e: lagflow::Error) -> Self {
        use lagflow::Error as E;
        match e {
            E::Config(m) => CliError::Config(m),
            E::Usage(m) => CliError::Usage(m),
            other => CliError::Solver(other),
        }
    }
}
