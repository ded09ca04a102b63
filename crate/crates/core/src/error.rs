use thiserror::Error;

/// Errors produced by the fitting, integration and merging pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("component {index}: {reason}")]
    InvalidComponent { index: usize, reason: String },

    #[error("integration did not converge: partial estimate {partial:e}, error bound {error_bound:e}")]
    Integration { partial: f64, error_bound: f64 },

    #[error("EM failed: {0}")]
    Em(String),

    #[error("model selection failed for every K: {0}")]
    Selection(String),

    #[error("measure {measure} on pair ({k}, {l}): {source}")]
    Measure {
        measure: String,
        k: u32,
        l: u32,
        #[source]
        source: Box<Error>,
    },

    #[error("unknown subcluster id {0}")]
    UnknownId(u32),

    #[error("labels: {0}")]
    Labels(String),

    #[error("csv row {row}, column {column}: {message}")]
    Csv {
        row: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics (integration, EM, selection) as
    /// opposed to malformed input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Integration { .. } | Error::Em(_) | Error::Selection(_) => true,
            Error::Measure { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
