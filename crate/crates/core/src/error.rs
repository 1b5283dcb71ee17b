use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid time set: {0}")]
    InvalidTimeSet(String),

    #[error("time {0} is not a point of the time set")]
    TimeNotInSet(f64),

    #[error("invalid norm: {0}")]
    InvalidNorm(String),

    #[error("norm is not differentiable at the origin")]
    NormNotDifferentiableAtZero,

    #[error("frame is rank deficient (smallest/largest singular value = {ratio:e})")]
    DegenerateFrame { ratio: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("fundamental matrix at t = {t} has condition number {condition:e} above bound {bound:e}")]
    IllConditionedProcess { t: f64, condition: f64, bound: f64 },

    #[error("integration produced non-finite values near t = {t}")]
    IntegrationBlowup { t: f64 },

    #[error("logarithm of nonpositive norm {value:e}")]
    NonpositiveNorm { value: f64 },

    #[error("instantaneous rates require an interval time set")]
    RequiresIntervalTimeSet,

    #[error("trajectory difference fell below the norm floor at t = {t}")]
    TrajectoryCollision { t: f64 },

    #[error("process is not hyperbolic")]
    NotHyperbolic,

    #[error("process is not attractive")]
    NotAttractive,

    #[error("no complementary pair of extremal subspaces found for rank {k}")]
    ComplementarityFailure { k: usize },

    #[error("matrix is not invertible")]
    NotInvertible,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
