use thiserror::Error;

/// Errors surfaced by the estimation pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An angle lies outside the open interval (-π/2, π/2).
    #[error("angle {0} rad is outside (-pi/2, pi/2)")]
    AngleOutOfRange(f64),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// `BᴴB` is singular or too ill-conditioned to invert reliably.
    #[error("steering matrix is ill-conditioned (condition number {0:e})")]
    IllConditioned(f64),

    /// A linear system that should be solvable was numerically singular.
    #[error("singular system: {0}")]
    Singular(String),

    /// The coarse stage returned fewer distinct peaks than sources.
    #[error("recovery found {found} peaks, expected {expected}")]
    InsufficientPeaks { found: usize, expected: usize },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
