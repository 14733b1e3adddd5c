use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("path crosses edge with unknown ratio at {kind} ({row}, {col})")]
    UnknownRatioOnPath {
        kind: &'static str,
        row: usize,
        col: usize,
    },

    #[error("unit ({row}, {col}) has no surviving pixels")]
    EmptyUnit { row: usize, col: usize },

    #[error("malformed {format} data: {detail}")]
    Format { format: &'static str, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
