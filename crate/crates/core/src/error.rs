use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the forecasting pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read check-in stream: {0}")]
    Io(#[from] std::io::Error),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{malformed} of {total} lines malformed (limit 10%); e.g. {samples:?}")]
    TooManyMalformed {
        malformed: usize,
        total: usize,
        samples: Vec<String>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no threshold reaches unseen ratio {target:.3} within 0.05 (achievable {min:.3}..={max:.3})")]
    UnreachableRatio { target: f64, min: f64, max: f64 },

    #[error("proximity prior undefined: no consecutive visit pairs in training data")]
    EmptyPrior,

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: loss {loss}")]
    Diverged { epoch: usize, batch: usize, loss: f64 },

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}

impl Error {
    /// Process exit status: 1 configuration, 2 data, 3 training failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config(_) => 1,
            Error::Diverged { .. } | Error::Numeric(_) => 3,
            _ => 2,
        }
    }
}
