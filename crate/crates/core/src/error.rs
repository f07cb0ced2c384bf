use thiserror::Error;

/// Errors raised by every layer of the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite coordinate at position {index}")]
    NonFinite { index: usize },

    #[error("linear map is not tagged as an orthogonal projector")]
    NotAProjector,

    #[error("projection onto stratum {stratum} is ill-posed at the given point")]
    IllPosedProjection { stratum: usize },

    #[error("point is at or beyond the curvature radius of stratum {stratum}")]
    CurvatureRadiusExceeded { stratum: usize },

    #[error("point is outside the well-posed neighborhood of stratum {stratum}")]
    OutsideWellPosed { stratum: usize },

    #[error("unknown stratum id {0}")]
    UnknownStratum(usize),

    #[error("unknown catalog function `{0}`; available: appendix_fig1, abs_diff_sq, abs_power(b) with 0 < b <= 1, two_lines_demo")]
    UnknownFunction(String),

    #[error("invalid stratification: {0}")]
    InvalidStratification(String),

    #[error("invalid neighborhood parameters: {0}")]
    InvalidParams(String),

    #[error("invalid step schedule: {0}")]
    InvalidSchedule(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("zero lies in the local subgradient hull; the point is genuinely critical")]
    ZeroInHull,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
