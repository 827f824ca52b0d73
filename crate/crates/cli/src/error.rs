use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed scenario text; the message carries line and column.
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    /// Well-formed scenario that does not describe a valid run.
    #[error("{path}:{line}: {message}")]
    Validation { path: PathBuf, line: usize, message: String },
    #[error("invalid argument: {0}")]
    Usage(String),
    #[error(transparent)]
    Solver(#[from] logdiff_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Csv(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Validation { .. } | CliError::Usage(_) => exit::VALIDATION,
            _ => exit::FAILURE,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    /// Step underflow, failed verification or an I/O error.
    pub const FAILURE: i32 = 1;
    pub const VALIDATION: i32 = 2;
    /// The comparison harness saw the ordering break.
    pub const ORDER_VIOLATED: i32 = 3;
}
