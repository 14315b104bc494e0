//! Front end for `vi-sharp`: reads a run configuration, solves, and writes
//! a trace plus a summary that records the configuration it came from.

pub mod config;
pub mod run;

pub use config::{RunConfig, SCHEMA};
pub use run::{oracle, run, sweep, Summary, SweepParam, SweepRow};

use vi_sharp::ViError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Other(_) => 1,
        }
    }
}

impl From<ViError> for CliError {
    fn from(e: ViError) -> Self {
        match e {
            ViError::ConfigInvalid { field, message } => CliError::Config(format!("solver.{field}: {message}")),
            ViError::NonFiniteIterate { .. } | ViError::NonFiniteOperatorValue => CliError::Numerical(e.to_string()),
            other => CliError::Other(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(format!("i/o error: {e}"))
    }
}
