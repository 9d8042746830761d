use thiserror::Error;

/// Errors raised across the toolkit.
///
/// Every variant maps to a stable machine-readable code (see [`Error::code`])
/// which the CLI reports on standard error.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension {0}: at least 2 is required")]
    InvalidDimension(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("rank {rank} out of range for dimension {dim}")]
    RankOutOfRange { rank: usize, dim: usize },

    #[error("weak value undefined: post-selection probability {probability:e} is zero")]
    UndefinedWeakValue { probability: f64 },

    #[error("pointer shift undefined: post-selection probability {probability:e} is zero")]
    UndefinedShift { probability: f64 },

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("post-selection {index} is unusable: {reason}")]
    UnusablePostselection { index: usize, reason: String },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("scheme {scheme} is inapplicable: {reason}")]
    SchemeInapplicable { scheme: String, reason: String },

    #[error("missing data for post-selection rows {rows:?}")]
    MissingData { rows: Vec<usize> },

    #[error("ambiguous reconstruction: kernel of dimension {kernel_dim}, another set of measurements must be performed")]
    AmbiguousReconstruction { kernel_dim: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unknown scheme {0:?}")]
    UnknownScheme(String),

    #[error("verification failed: {0}")]
    VerificationFailed(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidDimension(_) => "invalid-dimension",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::InvalidState(_) => "invalid-state",
            Error::RankOutOfRange { .. } => "rank-out-of-range",
            Error::UndefinedWeakValue { .. } => "undefined-weak-value",
            Error::UndefinedShift { .. } => "undefined-shift",
            Error::ResourceLimit(_) => "resource-limit",
            Error::UnusablePostselection { .. } => "unusable-postselection",
            Error::DegenerateData(_) => "degenerate-data",
            Error::SchemeInapplicable { .. } => "scheme-inapplicable",
            Error::MissingData { .. } => "missing-data",
            Error::AmbiguousReconstruction { .. } => "ambiguous-reconstruction",
            Error::Precondition(_) => "precondition",
            Error::UnknownScheme(_) => "unknown-scheme",
            Error::VerificationFailed(_) => "verification-failed",
            Error::Config(_) => "config",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }

    pub(crate) fn inapplicable(scheme: &str, reason: impl Into<String>) -> Self {
        Error::SchemeInapplicable {
            scheme: scheme.to_string(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
