use thiserror::Error;

#[derive(Debug, Error)]
pub enum NdError {
    #[error("dimension error in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("checkpoint format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NdError>;

pub(crate) fn dim_err(op: &'static str, detail: impl Into<String>) -> NdError {
    NdError::Dimension {
        op,
        detail: detail.into(),
    }
}
