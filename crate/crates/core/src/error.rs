use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid dimension {0}: need at least 3 cells per side")]
    InvalidDimension(usize),

    #[error("invalid genome: {0}")]
    InvalidGenome(String),

    #[error("invalid step count {0}: need at least one update")]
    InvalidSteps(usize),

    #[error("invalid horizon k={k} for a rollout of {steps} steps (need 1 <= k <= {max})", max = steps.saturating_sub(1))]
    InvalidHorizon { k: usize, steps: usize },

    #[error("invalid loss window ({n0}, {n1}] for {steps} steps")]
    InvalidLossWindow { n0: usize, n1: usize, steps: usize },

    #[error("shape mismatch: expected {expected}x{expected} grid, got {actual}x{actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("rollout trace has no recorded grids")]
    MissingGrids,

    #[error("mutual information is undefined for an empty pair set")]
    EmptyDistribution,

    #[error("invalid target shape: {0}")]
    InvalidShape(String),

    #[error("target mask is empty")]
    EmptyMask,

    #[error("target mask does not contain the seed cell ({0}, {0})")]
    SeedOutsideMask(usize),

    #[error("target file is not square: {0}")]
    TargetDimension(String),

    #[error("failed to parse {what} at line {line}: {message}")]
    Parse {
        what: &'static str,
        line: usize,
        message: String,
    },

    #[error("objective lists differ: {0}")]
    ObjectiveMismatch(String),

    #[error("individual {0} has not been evaluated")]
    NotEvaluated(u64),

    #[error("invalid evolution config: {0}")]
    InvalidConfig(String),

    #[error("no champions to seed from")]
    NoChampions,

    #[error("degenerate regression window [{from}, {to}]")]
    DegenerateWindow { from: usize, to: usize },

    #[error("sample too small for rank-sum test: need at least 3 values, got {0}")]
    SampleTooSmall(usize),

    #[error("config error at `{path}`: {message}")]
    Schema { path: String, message: String },

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
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
