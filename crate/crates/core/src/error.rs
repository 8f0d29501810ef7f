use std::fmt;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A numeric argument lies outside its admissible range.
    #[error("value out of range: {0}")]
    Range(String),

    /// Arguments are structurally inconsistent (lengths, orderings, ...).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// An exhaustive or sampling operation would exceed its budget.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// Malformed observation data.
    #[error("parse error{}: {message}", LineSuffix(*.line))]
    Parse { line: Option<usize>, message: String },

    /// Invalid or unknown configuration key.
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

struct LineSuffix(Option<usize>);

impl fmt::Display for LineSuffix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(line) => write!(f, " at line {line}"),
            None => Ok(()),
        }
    }
}

impl Error {
    pub(crate) fn parse(line: Option<usize>, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
