use thiserror::Error;

/// Error type shared by all modules in this crate.
#[derive(Debug, Error)]
pub enum XsubError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Malformed input file (bad magic, truncation, count mismatch).
    #[error("format error: {0}")]
    Format(String),

    /// Requested work exceeds a hard implementation bound.
    #[error("capacity error: {0}")]
    Capacity(String),

    /// A linear solve or loss became degenerate; the message carries diagnostics.
    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("training error: {0}")]
    Training(String),

    /// No eligible sample exists for the requested class.
    #[error("no eligible samples for class {class}")]
    EmptyClass { class: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, XsubError>;

impl XsubError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        XsubError::InvalidArgument(msg.into())
    }

    pub fn format(msg: impl Into<String>) -> Self {
        XsubError::Format(msg.into())
    }
}
