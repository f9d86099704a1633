use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown event `{0}` (not in the event catalog)")]
    UnknownEvent(String),

    #[error("duplicate event `{0}` in event set")]
    DuplicateEvent(String),

    #[error("too many events: {requested} requested, at most {max} can be counted in parallel")]
    TooManyEvents { requested: usize, max: usize },

    #[error("empty event set")]
    EmptyEventSet,

    #[error("invalid event spec: {0}")]
    InvalidEventSpec(String),

    #[error("invalid category label {0:?}")]
    InvalidCategory(String),

    #[error("unknown category `{0}`")]
    UnknownCategory(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("invalid target: {0}")]
    InvalidTarget(String),

    #[error("invalid collection plan: {0}")]
    InvalidPlan(String),

    #[error("permission denied: {0}")]
    PermissionDenied(String),

    #[error("measurement backend unavailable: {0}")]
    BackendUnavailable(String),

    #[error("target failed: {0}")]
    TargetFailed(String),

    #[error("counter read error: {0}")]
    CounterReadError(String),

    #[error("replay exhausted for category `{0}`")]
    ReplayExhausted(String),

    #[error("category `{category}`, run {run_index}: {source}")]
    Measurement {
        category: String,
        run_index: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid measurement set: {0}")]
    InvalidMeasurementSet(String),

    #[error("malformed trace at line {line}: {message}")]
    MalformedTrace { line: usize, message: String },

    #[error("event sets differ: {left:?} vs {right:?}")]
    EventSetMismatch {
        left: Vec<String>,
        right: Vec<String>,
    },

    #[error("empty sample")]
    EmptySample,

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("both samples have zero variance")]
    DegenerateVariance,

    #[error("invalid significance level {0} (must lie strictly between 0 and 1)")]
    InvalidAlpha(f64),

    #[error("insufficient categories: need at least 2, found {0}")]
    InsufficientCategories(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed report: {0}")]
    MalformedReport(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    StdIo(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(line: usize, message: impl Into<String>) -> Self {
        Error::MalformedTrace {
            line,
            message: message.into(),
        }
    }

    /// Strips measurement annotations to reach the underlying cause.
    pub fn root(&self) -> &Error {
        match self {
            Error::Measurement { source, .. } => source.root(),
            other => other,
        }
    }
}
