use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },
    #[error("joint `{joint}` has an invalid axis {axis:?}")]
    InvalidAxis { joint: String, axis: [f64; 3] },
    #[error("joint `{joint}` has inverted limits [{lo}, {hi}]")]
    LimitInversion { joint: String, lo: f64, hi: f64 },
    #[error("invalid robot description: {0}")]
    InvalidRobot(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("link index {index} out of range (robot has {count} links)")]
    LinkIndex { index: usize, count: usize },
    #[error("mesh not found: {0}")]
    MeshNotFound(PathBuf),
    #[error("empty mesh: {0}")]
    EmptyMesh(String),
    #[error("missing mesh for link {0}")]
    MissingMesh(usize),
    #[error(
        "all {candidates} dataset candidates rejected \
         (normal inconsistency: {rejected_normal}, re-projection: {rejected_reprojection})"
    )]
    EmptyDataset {
        candidates: usize,
        rejected_normal: usize,
        rejected_reprojection: usize,
    },
    #[error("training diverged at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },
    #[error("cholesky factorization failed after jitter {jitter:e}")]
    Factorization { jitter: f64 },
    #[error("non-finite mean trajectory at iteration {0}")]
    NonFiniteMean(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unsupported format: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.to_string(),
        }
    }

    /// Whether the error originates in user input (files, configs) as
    /// opposed to a numerical failure while running.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            Error::Diverged { .. } | Error::Factorization { .. } | Error::NonFiniteMean(_)
        )
    }
}
