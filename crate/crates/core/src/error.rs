use thiserror::Error;

/// Everything that can go wrong inside the library.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular input: {0}")]
    SingularInput(String),

    #[error("radius {r} outside trajectory range [{lo}, {hi}]")]
    OutOfRange { r: f64, lo: f64, hi: f64 },

    #[error("interlacing violation: {0}")]
    InterlacingViolation(String),

    #[error("ambiguous {kind} events near r = {r}")]
    AmbiguousEvent { kind: String, r: f64 },

    #[error("node count indeterminate for alpha = {alpha}: {cause}")]
    IndeterminateCount { alpha: f64, cause: String },

    #[error("node count not monotone: N({a1}) = {n1} but N({a2}) = {n2}")]
    MonotonicityViolation { a1: f64, n1: usize, a2: f64, n2: usize },

    #[error("no bracket for k = {k} below alpha = {cap}")]
    BracketNotFound { k: usize, cap: f64 },

    #[error("missing events: {0}")]
    MissingEvents(String),

    #[error("identity {identity} undefined at probe r = {r}")]
    ProbeUndefined { identity: String, r: f64 },

    #[error("malformed plan: {0}")]
    MalformedPlan(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
