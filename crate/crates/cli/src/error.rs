use std::path::PathBuf;

use impasse_core::Error as CoreError;
use thiserror::Error;

/// Process exit codes. A detected collapse is a successful run.
pub const EXIT_OK: u8 = 0;
pub const EXIT_NUMERICAL: u8 = 2;
pub const EXIT_INPUT: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },

    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },

    #[error("case file error at {pointer}: {message}")]
    Schema { pointer: String, message: String },

    #[error("unknown keys (use --lenient to skip): {}", .0.join(", "))]
    UnknownKeys(Vec<String>),

    #[error("{0}")]
    Usage(String),

    #[error("refusing to write an empty trajectory")]
    EmptyTrajectory,

    #[error("a plot needs at least two points, got {0}")]
    TooFewPoints(usize),

    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Read { .. }
            | CliError::Schema { .. }
            | CliError::UnknownKeys(_)
            | CliError::Usage(_) => EXIT_INPUT,
            CliError::Core(e) => match e {
                CoreError::Disconnected { .. }
                | CoreError::InvalidCase(_)
                | CoreError::SubtransientMismatch { .. }
                | CoreError::BusOutOfRange { .. }
                | CoreError::InvalidEvents(_) => EXIT_INPUT,
                _ => EXIT_NUMERICAL,
            },
            CliError::Write { .. } | CliError::EmptyTrajectory | CliError::TooFewPoints(_) => 1,
        }
    }
}
