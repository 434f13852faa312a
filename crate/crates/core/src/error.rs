use thiserror::Error;

/// Errors produced by the estimation and testing routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("series too short: n = {n}, need at least {min}")]
    SeriesTooShort { n: usize, min: usize },

    #[error("non-finite value at position {index}")]
    NonFiniteValue { index: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("bandwidth {bandwidth} inadmissible for n = {n}: {reason}")]
    BadBandwidth {
        bandwidth: f64,
        n: usize,
        reason: &'static str,
    },

    #[error("singular weighted least-squares system at t = {t} (grid index {index})")]
    SingularFit { index: usize, t: f64 },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error(
        "locator window does not fit the trimmed range (n = {n}, window = {window}, zeta = {zeta})"
    )]
    WindowExceedsRange { n: usize, window: usize, zeta: f64 },

    #[error("degenerate segment for piecewise variance fit: {0}")]
    DegenerateSegment(String),

    #[error(
        "change-point estimate at endpoint index {index} of {n}; \
         the normalized L2 statistic is undefined there"
    )]
    EndpointChangePoint { index: usize, n: usize },

    #[error("bootstrap configuration invalid: {0}")]
    BadBootstrapConfig(String),

    #[error("bandwidth grid needs at least 7 candidates, got {0}")]
    GridTooSmall(usize),

    #[error("every candidate bandwidth was degenerate: {0}")]
    DegenerateGrid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
