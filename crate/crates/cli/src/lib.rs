//! Reproducible experiment pipelines over `sip-core`, driven by a TOML config.

pub mod config;
pub mod error;
pub mod pipeline;

pub use config::ExperimentConfig;
pub use error::CliError;
pub use pipeline::{config_hash, run, Command, InvertFlags};
