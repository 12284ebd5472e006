use std::fmt;

/// Failure classes of a scenario run, each with its own process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable, malformed or invalid configuration.
    Config(String),
    /// A numerical precondition failed during the computation.
    Numerical(String),
    /// Anything else: I/O on the output side, bugs.
    Internal(String),
    /// `verify` ran and at least one golden check failed.
    Golden(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Internal(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Golden(_) => 4,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical precondition failed: {m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
            CliError::Golden(n) => write!(f, "{n} golden check(s) failed"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<weakval::Error> for CliError {
    fn from(e: weakval::Error) -> Self {
        match e {
            weakval::Error::Io(_) => CliError::Internal(e.to_string()),
            _ if e.is_numerical() => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
