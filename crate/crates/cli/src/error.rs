use std::path::PathBuf;

use thiserror::Error;

use crate::config::FieldError;
use crate::snapshot::SnapshotError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read config {path}: {source}")]
    ReadConfig {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("cannot parse config: {0}")]
    ParseConfig(#[from] toml::de::Error),

    #[error("invalid config:\n{}", format_fields(.0))]
    InvalidConfig(Vec<FieldError>),

    #[error(transparent)]
    Snapshot(#[from] SnapshotError),

    #[error("report {path}: {message}")]
    Report { path: PathBuf, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] entrosc_core::Error),
}

fn format_fields(errors: &[FieldError]) -> String {
    errors
        .iter()
        .map(|e| format!("  {e}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl CliError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ReadConfig { .. } | CliError::ParseConfig(_) | CliError::InvalidConfig(_) => 2,
            _ => 1,
        }
    }
}
