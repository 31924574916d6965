use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("instance is not usable: {0}")]
    InvalidInstance(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid big-M configuration: {0}")]
    InvalidBigM(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("simplex iteration limit of {limit} exceeded")]
    IterationLimit { limit: usize },

    #[error("numerical breakdown: pivot magnitude {pivot:e} below threshold")]
    NumericalBreakdown { pivot: f64 },

    #[error("branch-and-bound node limit of {limit} exceeded")]
    NodeLimit { limit: usize },

    #[error("pattern enumeration needs 2^{j} LPs, above the cap of 2^{cap}")]
    EnumerationCap { j: usize, cap: usize },

    #[error("{0}")]
    NoFeasibleStart(String),

    #[error("instance generation failed after {retries} retries")]
    GenerationRetries { retries: usize },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
