//! Experiment runner: configs, presets, sweeps, CSV output and the
//! validation suite behind the `qdd` binary.

pub mod config;
pub mod experiments;
pub mod output;
pub mod presets;
pub mod validate;

use thiserror::Error;

pub use config::{ExperimentConfig, ExperimentKind, Overrides};
pub use experiments::{run_experiment, RunSummary};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] qdd_core::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("validation failed: {failed} of {total} checks")]
    Validation { failed: usize, total: usize },

    #[error("{failed} of {total} rows failed")]
    Partial { failed: usize, total: usize },
}

impl RunError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            RunError::Validation { .. } => 2,
            RunError::Partial { .. } => 3,
            RunError::Core(_) | RunError::Io(_) | RunError::Csv(_) => 4,
        }
    }
}
