use std::path::PathBuf;

use thiserror::Error;

use crate::instance::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad argument or out-of-range input value.
    #[error("input error: {0}")]
    Input(String),

    #[error("failed to parse {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("instance failed validation: {}", join_violations(.0))]
    Validation(Vec<Violation>),

    #[error("solution invariant broken: {0}")]
    Invariant(String),

    /// The solver ran out of positions to place an order line.
    #[error("structural error: {0}")]
    Structural(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("numeric domain error: {0}")]
    Numeric(String),

    #[error("refusing to enumerate: {0}")]
    LimitsExceeded(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
