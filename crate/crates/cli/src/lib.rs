//! Experiment runner for the `fastvol` library: configuration loading,
//! subcommand bodies and run outputs.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use config::{load_config, parse_config, ExperimentConfig};
pub use error::CliError;
