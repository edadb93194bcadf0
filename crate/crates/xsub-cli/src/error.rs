use thiserror::Error;

use xsub::XsubError;

/// Harness errors, classified by exit code: 2 for configuration problems,
/// 3 for file problems, 4 for numerical failures, 1 for everything else.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("file error: {0}")]
    File(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::File(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Other(_) => 1,
        }
    }
}

impl From<XsubError> for CliError {
    fn from(e: XsubError) -> Self {
        match e {
            XsubError::Io(inner) => CliError::File(inner.to_string()),
            XsubError::Format(msg) => CliError::File(msg),
            XsubError::Numerical(msg) => CliError::Numerical(msg),
            other => CliError::Other(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::File(e.to_string())
    }
}
