use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("invalid sequence: {0}")]
    InvalidSequence(String),

    #[error("unsupported spatial dimension {0} (expected 2 or 3)")]
    UnsupportedDimension(usize),

    #[error("malformed header in {path}: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },

    #[error("truncated payload in {path}: expected {expected} bytes, found {found}")]
    TruncatedPayload {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("too many pyramid levels: {levels} requested for dims {dims:?}")]
    TooManyLevels { levels: usize, dims: Vec<usize> },

    #[error("times are not strictly increasing")]
    TimesNotIncreasing,

    #[error("singular tridiagonal system: pivot {pivot:e} at row {row}")]
    SingularSystem { row: usize, pivot: f64 },

    #[error("invalid subset: {0}")]
    InvalidSubset(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("objective is not finite at the starting point")]
    NonFiniteObjective,

    #[error("stopping rule needs at least two completed temporal levels, got {0}")]
    InsufficientHistory(usize),

    #[error("synthetic sequence too dissimilar: minimum consecutive correlation {0:.4} <= 0.9")]
    MotionTooLarge(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
