use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("chain is not ergodic: {0}")]
    Ergodicity(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("step-size schedule error: {0}")]
    Schedule(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("invariant violated at step {step}: {detail}")]
    Invariant { step: u64, detail: String },

    #[error("replication {index}: {source}")]
    Replication {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("unattainable: {0}")]
    Unattainable(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the CLI: 2 validation, 3 invariant, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Invariant { .. } => 3,
            Error::Replication { source, .. } => source.exit_code(),
            Error::Io { .. } | Error::Csv(_) => 4,
            _ => 2,
        }
    }
}

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::Dimension {
            context,
            expected,
            found,
        });
    }
    Ok(())
}

pub(crate) fn check_finite(context: &str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Numeric(format!("{context} is not finite ({value})")))
    }
}
