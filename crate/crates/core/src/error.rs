use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("Euler-rate extraction too close to gimbal lock (cos(theta) = {cos_theta:e})")]
    GimbalProximity { cos_theta: f64 },

    #[error("non-finite state encountered at t = {t} s")]
    NonFiniteState { t: f64 },

    #[error("gravity observable is degenerate: |g0| = {norm} (expected {expected})")]
    DegenerateGravityObservable { norm: f64, expected: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("infinite horizon: angular momentum is zero")]
    InfiniteHorizon,

    #[error("integer overflow evaluating {0}")]
    Overflow(String),

    #[error("inertia is not symmetric about the body z axis: |Ix - Iy| / Ix = {0:e}")]
    SymmetryViolation(f64),

    #[error("Riccati iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("pair (A, B) is not stabilizable")]
    NotStabilizable,

    #[error("input matrix has rank {rank} < {cols}")]
    RankDeficientB { rank: usize, cols: usize },

    #[error("normalizer is zero for quantity `{0}`")]
    ZeroNormalizer(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
