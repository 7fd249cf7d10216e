use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("empty matte for element {element} in frame {t}")]
    EmptyMatte { t: usize, element: u32 },

    #[error("element {element} footprint leaves the {width}x{height} grid in frame {t}")]
    FootprintOutOfGrid {
        t: usize,
        element: u32,
        width: usize,
        height: usize,
    },

    #[error("non-positive variance: {0}")]
    NonPositiveVariance(String),

    #[error("degenerate projection: matrix is rank deficient")]
    DegenerateProjection,

    #[error("zero-norm transform")]
    ZeroNorm,

    #[error("empty layout")]
    EmptyLayout,

    #[error("insufficient history: {0}")]
    InsufficientHistory(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// True for errors caused by bad user input rather than runtime faults.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Invalid(_)
                | Error::Json { .. }
                | Error::Format { .. }
                | Error::Dimension { .. }
                | Error::FootprintOutOfGrid { .. }
        )
    }
}
