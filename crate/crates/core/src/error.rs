use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent caller input (shapes, lengths, ordering).
    #[error("invalid input: {0}")]
    Input(String),

    #[error("query {value} outside valid range [{min}, {max}]")]
    Range { value: f64, min: f64, max: f64 },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// A value that violates physics, such as a supersonic source.
    #[error("outside physical domain: {0}")]
    PhysicalDomain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("non-finite value at step {step}: {what}")]
    NonFinite { step: usize, what: String },

    #[error("training diverged at step {step}: loss = {loss}")]
    Training { step: usize, loss: f64 },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("wav: {0}")]
    Wav(hound::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl From<hound::Error> for Error {
    fn from(e: hound::Error) -> Self {
        match e {
            hound::Error::IoError(io) => Error::Io(io),
            other => Error::Wav(other),
        }
    }
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    /// Whether this failure is numerical (as opposed to bad input).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Numeric(_) | Error::NonFinite { .. } | Error::Training { .. }
        )
    }
}
