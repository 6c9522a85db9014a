use std::fmt;
use std::process::ExitCode;

use mpmqir_core::Error as CoreError;

/// Process exit categories.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitCategory {
    Io = 1,
    Usage = 2,
    InputFormat = 3,
    Integrity = 4,
    Training = 5,
}

impl From<ExitCategory> for ExitCode {
    fn from(c: ExitCategory) -> Self {
        ExitCode::from(c as u8)
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(CoreError),
}

impl CliError {
    pub fn category(&self) -> ExitCategory {
        match self {
            CliError::Usage(_) => ExitCategory::Usage,
            CliError::Core(e) => match e {
                CoreError::Config(_) => ExitCategory::Usage,
                CoreError::Contract(_) | CoreError::Parse { .. } => ExitCategory::InputFormat,
                CoreError::Integrity { .. } => ExitCategory::Integrity,
                CoreError::Training { .. } => ExitCategory::Training,
                CoreError::Io(_) => ExitCategory::Io,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Core(e) => e.fmt(f),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(CoreError::Io(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(CoreError::Io(e.into()))
    }
}

pub type CliResult<T> = Result<T, CliError>;
