use thiserror::Error;

/// Crate-wide error type. Variants are grouped by the stage that raises them.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid weight table: {0}")]
    InvalidWeightTable(String),

    #[error("prefix too short: {0}")]
    PrefixTooShort(String),

    #[error("index out of stored range: {0}")]
    OutOfRange(String),

    #[error("sequence class violation: {0}")]
    ClassViolation(String),

    #[error("insufficient prefix: {0}")]
    InsufficientPrefix(String),

    #[error("derivative guard tripped: {0}; retry with a smaller truncation order")]
    TruncationGuard(String),

    #[error("seminorm parameters invalid: {0}")]
    SeminormParams(String),

    #[error("no compact domain for sup search: {0}")]
    NoCompactDomain(String),

    #[error("quadrature did not reach the requested accuracy: {0}")]
    QuadratureAccuracy(String),

    #[error("divergent pairing: {0}")]
    DivergentPairing(String),

    #[error("operator is not of the requested class: {0}")]
    NotOfClass(String),

    #[error("unsupported combination: {0}")]
    UnsupportedCombination(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
