use std::fmt;

/// Exit status for a successful run.
pub const EXIT_OK: i32 = 0;
/// Bad flags, unreadable or invalid configuration, embedder mismatch.
pub const EXIT_CONFIG: i32 = 2;
/// A model endpoint failed after retries.
pub const EXIT_PROVIDER: i32 = 3;
/// Missing or malformed input data.
pub const EXIT_DATA: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Provider,
    Data,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn new(kind: ErrorKind, error: impl Into<anyhow::Error>) -> Self {
        Self {
            kind,
            error: error.into(),
        }
    }

    pub fn config(message: impl fmt::Display) -> Self {
        Self::new(ErrorKind::Config, anyhow::anyhow!("{message}"))
    }

    pub fn provider(message: impl fmt::Display) -> Self {
        Self::new(ErrorKind::Provider, anyhow::anyhow!("{message}"))
    }

    pub fn data(message: impl fmt::Display) -> Self {
        Self::new(ErrorKind::Data, anyhow::anyhow!("{message}"))
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Config => EXIT_CONFIG,
            ErrorKind::Provider => EXIT_PROVIDER,
            ErrorKind::Data => EXIT_DATA,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

impl std::error::Error for CliError {}
