use std::path::PathBuf;

use thiserror::Error;

/// Failures of the driver, each mapped to one process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error in {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path} already exists (pass --force to overwrite)")]
    Exists { path: PathBuf },

    #[error("stage {stage} failed: {source}")]
    Pipeline {
        stage: &'static str,
        #[source]
        source: genesol_core::Error,
    },

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("assertion failed: {name} = {value:e} exceeds {bound:e} (max_violation {max_violation:e})")]
    Assertion { name: String, value: f64, bound: f64, max_violation: f64 },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Assertion { .. } => 1,
            CliError::Config(_) | CliError::Read { .. } | CliError::Format { .. } | CliError::Exists { .. } => 2,
            CliError::Pipeline { .. } | CliError::Write { .. } => 3,
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        CliError::Format { path: path.into(), message: message.into() }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Tags a core error with the pipeline stage it came from.
pub trait StageExt<T> {
    fn stage(self, stage: &'static str) -> CliResult<T>;
}

impl<T> StageExt<T> for genesol_core::Result<T> {
    fn stage(self, stage: &'static str) -> CliResult<T> {
        self.map_err(|source| CliError::Pipeline { stage, source })
    }
}
