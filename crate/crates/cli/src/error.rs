use std::path::PathBuf;

use prosocial_core::Error as CoreError;
use thiserror::Error;

/// Failures of a command, each mapped to its own exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error(transparent)]
    Core(CoreError),

    #[error("service error: {0}")]
    Service(String),
}

impl CliError {
    pub const USAGE: i32 = 2;
    pub const IO: i32 = 3;
    pub const PARSE: i32 = 4;
    pub const VALIDATION: i32 = 5;
    pub const COMPUTATION: i32 = 6;
    pub const SERVICE: i32 = 7;

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => Self::USAGE,
            CliError::Io { .. } => Self::IO,
            CliError::Parse { .. } => Self::PARSE,
            CliError::Validation(_) => Self::VALIDATION,
            CliError::Core(e) => match e {
                CoreError::Io(_) => Self::IO,
                CoreError::Json(_) | CoreError::Csv(_) | CoreError::Parse { .. } => Self::PARSE,
                CoreError::InvalidConfig(_) => Self::USAGE,
                CoreError::InvalidParams(_)
                | CoreError::InvalidBelief(_)
                | CoreError::InvalidReward(_)
                | CoreError::DimensionMismatch { .. }
                | CoreError::Legality { .. }
                | CoreError::FingerprintMismatch { .. } => Self::VALIDATION,
                _ => Self::COMPUTATION,
            },
            CliError::Service(_) => Self::SERVICE,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> CliError {
        CliError::Parse {
            path: path.into(),
            message: err.to_string(),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
