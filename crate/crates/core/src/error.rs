use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A line of a text input could not be parsed. Lines are 1-based.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A value parsed but violates a documented range or invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// A binary model file is corrupt, truncated or of the wrong kind.
    #[error("model file: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(message: impl Into<String>) -> Self {
        Error::Validation(message.into())
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
