//! Command-line orchestration of the ATP precompute pipeline.
//!
//! Stages exchange data only through files in an output directory, so the
//! one-shot [`run_pipeline`] and a sequence of individual subcommands produce
//! the same bytes.

pub mod config;
pub mod dataset;
pub mod error;
pub mod manifest;
pub mod stages;

pub use config::PipelineConfig;
pub use error::{CliError, CliResult, ExitKind};
pub use stages::{run_pipeline, ProbeInputs};
