use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by every stage of the forecasting pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("timestamps not monotone at line {line}: {timestamp}")]
    NonMonotoneTimestamps { line: usize, timestamp: String },

    #[error("unparseable timestamp at line {line}: {timestamp}")]
    BadTimestamp { line: usize, timestamp: String },

    #[error("unparseable value at line {line}, column {column}: {value}")]
    BadValue {
        line: usize,
        column: String,
        value: String,
    },

    #[error("unknown series `{0}`")]
    UnknownSeries(String),

    #[error("series `{series}` has a gap at position {index} with no neighbour on one side")]
    GapAtSeriesBoundary { series: String, index: usize },

    #[error("day {day} has no observations in any series")]
    AllSeriesMissingDay { day: usize },

    #[error("degenerate sample: all values identical")]
    DegenerateSample,

    #[error("sample too small: need at least {needed}, got {got}")]
    SampleTooSmall { needed: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("insufficient history: {0}")]
    InsufficientHistory(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("window length {0} not present in forecast panel")]
    UnknownTau(usize),

    #[error("requested {k} factors but at most {max} are available")]
    KTooLarge { k: usize, max: usize },

    #[error("non-finite value in input matrix")]
    NonFiniteInput,

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("quantile solver did not converge after {iterations} iterations (gap {gap:e})")]
    NonConvergence { iterations: usize, gap: f64 },

    #[error("insufficient errors: need {needed}, got {got}")]
    InsufficientErrors { needed: usize, got: usize },

    #[error("coverage level {0} does not map onto the percentile grid")]
    LevelNotOnGrid(f64),

    #[error("misaligned index: {0}")]
    MisalignedIndex(String),

    #[error("regime boundary {0} outside the evaluation range")]
    BoundaryOutOfRange(String),

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("missing pipeline stage output: {0}")]
    MissingStage(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
