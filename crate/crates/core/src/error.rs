use thiserror::Error;

/// Errors produced by the numeric core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value in {context} at index {index}")]
    NonFinite { context: String, index: usize },

    #[error("non-finite loss for ray {ray}: {losses:?}")]
    NonFiniteLoss { ray: usize, losses: Vec<f64> },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("tape does not match: {0}")]
    TapeMismatch(String),

    #[error("theta[{index}] = {value} is outside the admissible box [0, 1]")]
    OutOfDomain { index: usize, value: f64 },

    #[error("degenerate direction: {0}")]
    Degenerate(String),

    #[error("operation not supported for problem `{problem}`: {what}")]
    Unsupported { problem: String, what: String },

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn dims(context: impl Into<String>, expected: usize, actual: usize) -> Self {
        Error::DimensionMismatch {
            context: context.into(),
            expected,
            actual,
        }
    }
}

/// Returns an error naming the first non-finite entry of `values`.
pub(crate) fn ensure_finite(context: &str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite {
            context: context.to_string(),
            index,
        }),
        None => Ok(()),
    }
}
