//! Configuration, experiment driver and file formats behind the `mmc` binary.

pub mod config;
pub mod error;
pub mod experiment;
pub mod formats;
pub mod presets;

pub use config::{ExperimentConfig, InitKind, OUTPUT_DIR_ENV};
pub use error::{CliError, Result};
pub use experiment::{resume, run_convergence, run_experiment, run_until, RunSummary};
