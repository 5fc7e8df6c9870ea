use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flag value or bad input file; exit code 1.
    #[error("{flag}: {message}")]
    Invalid { flag: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// A checked property failed; exit code 2 with the witness on stderr.
    #[error("{summary}")]
    Violation {
        summary: String,
        witness: serde_json::Value,
    },
}

impl CliError {
    pub fn invalid(flag: impl Into<String>, message: impl ToString) -> Self {
        CliError::Invalid {
            flag: flag.into(),
            message: message.to_string(),
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid { .. } | CliError::Io { .. } => 1,
            CliError::Violation { .. } => 2,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
