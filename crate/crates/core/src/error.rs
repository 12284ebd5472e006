use thiserror::Error;

/// Errors raised by the library. `Precondition` and `Degenerate*` mark numerical
/// preconditions that the caller can fix by changing parameters.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("degenerate normalization: |norm| = {norm:e} is below the threshold {threshold:e}")]
    DegenerateNormalization { norm: f64, threshold: f64 },
    #[error("numerical precondition violated: {0}")]
    Precondition(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    /// True for failures caused by numerical preconditions rather than malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::DegenerateNormalization { .. } | Error::Precondition(_))
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
        Error::Parse { line, msg: e.to_string() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
