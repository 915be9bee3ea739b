use pilm::PilmError;
use thiserror::Error;

/// Failure categories, each with its own process exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{0}")]
    Tolerance(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Tolerance(_) => 5,
        }
    }
}

impl From<PilmError> for CliError {
    fn from(e: PilmError) -> Self {
        match e {
            e if e.is_numerical() => CliError::Numerical(e.to_string()),
            PilmError::Data(_) | PilmError::PointOutOfDomain { .. } => CliError::Data(e.to_string()),
            e => CliError::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
