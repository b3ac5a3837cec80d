use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeoError {
    /// Argument outside the mathematical domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed or mismatched input data.
    #[error("invalid input: {0}")]
    Input(String),

    /// Every state path has zero probability (or density) at this step.
    #[error("sequence impossible under model at step {step}")]
    ImpossibleSequence { step: usize },

    /// An estimator has no finite solution for the given samples.
    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, GeoError>;
