//! Experiment runner for `propa`: JSON configs in, recipe JSON, CSV
//! diagnostics and a summary of every checked inequality out.
//!
//! Exit codes: 0 pass, 2 configuration error, 3 selection exhaustion,
//! 4 assertion failure (1 for anything else, such as I/O errors).

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use commands::{execute, Cli, Report};
pub use config::ExperimentConfig;
pub use error::CliError;
pub use run::{run, RunOutcome, Summary};
