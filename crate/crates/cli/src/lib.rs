//! Batch front end for squeezed-probe tomography runs: configuration
//! parsing, run orchestration, persistence, and comparison reports.

pub mod config;
pub mod io;
pub mod report;
pub mod tasks;

use thiserror::Error;

/// CLI-level errors carrying the process exit code:
/// 2 = configuration, 3 = physical domain, 4 = numerical failure.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical error: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Domain(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl From<sqpt::Error> for CliError {
    fn from(e: sqpt::Error) -> Self {
        match e {
            sqpt::Error::Numerical(msg) => CliError::Numerical(msg),
            other => CliError::Domain(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
