use thiserror::Error;

/// Errors raised by the codec library.
///
/// The variants map onto failure categories the command-line front end
/// reports with distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid geometry or hyperparameters supplied by the caller.
    #[error("configuration error: {0}")]
    Config(String),

    /// A function was called with arguments that violate its contract
    /// (length mismatches, wrong value domain, missing gate angle).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Malformed input file. `offset` is the byte position where parsing failed.
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    /// Checkpoint failed an integrity check (CRC, parameter count).
    /// `offset` is set when the failure comes from decoding bytes.
    #[error("integrity error{}: {message}", offset.map(|o| format!(" at byte {o}")).unwrap_or_default())]
    Integrity {
        offset: Option<usize>,
        message: String,
    },

    /// Training produced a non-finite loss or gradient.
    #[error("training failed at step {step}: {message}")]
    Training { step: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(offset: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            offset,
            message: message.into(),
        }
    }

    pub(crate) fn integrity(offset: Option<usize>, message: impl Into<String>) -> Self {
        Error::Integrity {
            offset,
            message: message.into(),
        }
    }

    /// Byte position of a decoding failure, when there is one.
    pub fn offset(&self) -> Option<usize> {
        match self {
            Error::Parse { offset, .. } => Some(*offset),
            Error::Integrity { offset, .. } => *offset,
            _ => None,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
