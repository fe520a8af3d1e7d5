use thiserror::Error;

/// Errors raised by the planning library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum HrmError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("erosion of arena {arena} by robot part {part} is empty or degenerate")]
    ErosionDegenerate { part: usize, arena: usize },

    #[error("point set is rank deficient ({points} points in {dim}D)")]
    RankDeficient { points: usize, dim: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("scene error at {field}: {message}")]
    Scene { field: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for HrmError {
    fn from(err: std::io::Error) -> Self {
        HrmError::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, HrmError>;
