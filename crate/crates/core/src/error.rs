use thiserror::Error;

/// Errors raised by the GFMM library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GfmmError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("hyperbox has not absorbed any pattern yet")]
    EmptyHyperbox,

    #[error("invalid pattern: {0}")]
    InvalidPattern(String),

    #[error("model has no labelled hyperboxes")]
    EmptyModel,

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("{0}")]
    Parse(String),

    #[error("unsupported model format version {found} (expected {expected})")]
    VersionMismatch { expected: u32, found: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for GfmmError {
    fn from(e: std::io::Error) -> Self {
        GfmmError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, GfmmError>;
