//! Experiment orchestration for the wolfebfgs solver.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod runner;

pub use commands::{Cli, Command};
pub use config::{ExperimentConfig, Job};
pub use runner::{execute, unit_onset, RunOutcome, UNIT_RUN};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_ABORT: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("malformed trace: {0}")]
    Csv(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("solver error: {0}")]
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Csv(_) | Self::Io(_) => EXIT_INPUT,
            Self::Solver(_) => EXIT_ABORT,
        }
    }
}
