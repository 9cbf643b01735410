use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("empty patch")]
    EmptyPatch,

    #[error("insufficient bootstrap samples: need at least {needed}, got {got}")]
    InsufficientBootstrap { needed: usize, got: usize },

    #[error("insufficient ground truth: {0}")]
    InsufficientGroundTruth(String),

    #[error("degenerate fusion weights: W_L + W_S = 0")]
    DegenerateWeights,

    #[error("no ground reference available for obstacle")]
    NoGroundReference,

    #[error("empty obstacle sub-cloud")]
    EmptyObstacle,

    #[error("empty cell: no samples to fit")]
    EmptyCell,

    #[error("insufficient training data: {0}")]
    InsufficientTraining(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn parse(path: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    /// Wraps an error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
