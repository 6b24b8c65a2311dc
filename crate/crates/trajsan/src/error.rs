use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// Malformed input file.
    #[error("{}:{line}: {reason}", path.display())]
    Format { path: PathBuf, line: usize, reason: String },
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("{}:{line}: location `{token}` is not in the universe", path.display())]
    Universe { path: PathBuf, line: usize, token: String },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 1 for unreadable or malformed files, 2 for bad parameters, 3 for
    /// tokens outside the universe.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Format { .. } => 1,
            CliError::Param(_) => 2,
            CliError::Universe { .. } => 3,
        }
    }
}

impl From<trajsan_core::Error> for CliError {
    fn from(e: trajsan_core::Error) -> Self {
        CliError::Param(e.to_string())
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
