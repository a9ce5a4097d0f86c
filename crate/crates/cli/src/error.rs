use std::path::PathBuf;

use opa_squeeze::ErrorClass;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Domain(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) | CliError::Io { .. } => 2,
            CliError::Domain(_) => 3,
        }
    }

    /// Reclassifies a library error raised while checking a run config:
    /// bad config values are input errors whatever their kind.
    pub fn invalid(context: &str, err: opa_squeeze::Error) -> Self {
        CliError::Validation(format!("{context}: {err}"))
    }
}

impl From<opa_squeeze::Error> for CliError {
    fn from(err: opa_squeeze::Error) -> Self {
        match err.class() {
            ErrorClass::Validation => CliError::Validation(err.to_string()),
            ErrorClass::Domain => CliError::Domain(err.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
