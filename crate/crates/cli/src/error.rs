use std::path::Path;

use thiserror::Error;

/// Exit status for usage and validation failures.
pub const EXIT_USAGE: i32 = 2;
/// Exit status for numerical failures during inference.
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: cs_scan_core::Error,
    },
    #[error(transparent)]
    Core(#[from] cs_scan_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) | CliError::File { source: e, .. } if e.is_numerical() => EXIT_NUMERICAL,
            _ => EXIT_USAGE,
        }
    }

    pub fn file(path: &Path, source: impl Into<cs_scan_core::Error>) -> Self {
        CliError::File {
            path: path.display().to_string(),
            source: source.into(),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
