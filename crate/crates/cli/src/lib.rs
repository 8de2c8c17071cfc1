//! Batch driver: configuration, file formats, pipeline stages and the
//! `genesol` command line.

pub mod app;
pub mod config;
pub mod error;
pub mod formats;
pub mod pipeline;
pub mod report;
pub mod summary;

pub use app::main_with_args;
pub use config::{ExperimentConfig, LoadedConfig};
pub use error::{CliError, CliResult};
pub use pipeline::{run, RunOptions};
pub use report::Report;
