use std::path::PathBuf;

use idla_core::sources::ValidationReport;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("flow specification rejected:\n{0}")]
    InvalidFlow(ValidationReport),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invariant failed: {0}")]
    Invariant(String),

    #[error(transparent)]
    Core(idla_core::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 0 ok, 1 invariant failure, 2 config error, 3 I/O error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::InvalidFlow(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Invariant(_) => 1,
            CliError::Core(e) => match e {
                idla_core::Error::Io(_) => 3,
                idla_core::Error::InvalidFlow(_) | idla_core::Error::InvalidResolution(_) => 2,
                _ => 1,
            },
        }
    }
}

impl From<idla_core::Error> for CliError {
    fn from(e: idla_core::Error) -> Self {
        match e {
            idla_core::Error::InvalidFlow(r) => CliError::InvalidFlow(r),
            e => CliError::Core(e),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
