use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SliceError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("no root found: {0}")]
    NoRoot(String),

    /// The requested level lies at or above the supremum of the profile, so
    /// the super level set is empty.
    #[error("empty super level set at log level {log_t}")]
    EmptyLevel { log_t: f64 },

    #[error("invalid level-set function: {0}")]
    InvalidLevelSet(String),

    #[error("degenerate support: {0}")]
    DegenerateSupport(String),

    #[error("insufficient data: need at least {needed} values, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("trace has zero variance")]
    ZeroVariance,

    #[error("numerical failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, SliceError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(SliceError::Domain(msg.into()))
}
