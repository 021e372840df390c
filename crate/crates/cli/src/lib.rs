//! Batch front door for the solitonforge experiments: configuration,
//! sweeps, run records and their CSV/JSON files.

pub mod commands;
pub mod config;
pub mod criteria;
pub mod record;

use thiserror::Error;

pub use commands::{run, run_with_jobs};
pub use config::{Command, ConfigFile, ExperimentConfig};
pub use record::{emit, RunRecord, Table};

/// Exit code for a successful run.
pub const EXIT_OK: i32 = 0;
/// Exit code for configuration errors.
pub const EXIT_CONFIG: i32 = 2;
/// Exit code for numerical failures.
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("cannot parse config: {0}")]
    Parse(String),

    #[error("invalid config: {0}")]
    Invalid(String),

    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Error)]
#[error("cannot write {path}: {source}")]
pub struct EmitError {
    pub path: String,
    #[source]
    pub source: std::io::Error,
}
