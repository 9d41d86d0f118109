use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Solver(#[from] routebargain_core::Error),

    #[error("{failed} of {total} checks failed")]
    ChecksFailed { failed: usize, total: usize },

    #[error("{failed} of {total} sweep points failed")]
    SweepFailed { failed: usize, total: usize },
}

impl CliError {
    pub fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// 1 for numerical trouble or failed checks, 2 for bad input.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Solver(_) | CliError::ChecksFailed { .. } | CliError::SweepFailed { .. } => 1,
            CliError::Parse { .. } | CliError::Validation { .. } | CliError::Io { .. } | CliError::Usage(_) => 2,
        }
    }
}
