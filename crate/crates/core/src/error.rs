use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("theta must be strictly increasing and positive (violated at index {index})")]
    NonIncreasingTheta { index: usize },

    #[error("{what} is not a probability vector: {reason}")]
    PriorNotSimplex { what: &'static str, reason: String },

    #[error("mu must lie in (0, 1), got {0}")]
    MuOutOfRange(f64),

    #[error("highest persuasion threshold exceeds one: mu*(1+theta_n) = {0}")]
    ThresholdExceedsOne(f64),

    #[error("punishment utility u_bar = {u_bar} must be below the uninformed sender utility {bound}")]
    PunishmentTooHigh { u_bar: f64, bound: f64 },

    #[error("discount factor must lie in (0, 1), got {0}")]
    DeltaOutOfRange(f64),

    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("segment weights must be nonnegative and sum to one (sum = {0})")]
    WeightsNotNormalized(f64),

    #[error("policy is not Bayes-plausible: coordinate {index} averages to {got}, prior is {expected}")]
    NotBayesPlausible {
        index: usize,
        got: f64,
        expected: f64,
    },

    #[error("truthful segment index {0} is out of range")]
    TruthfulIndexOutOfRange(usize),

    #[error("sender policy has {got} entries but the platform policy has {expected} segments")]
    SegmentCountMismatch { got: usize, expected: usize },

    #[error("lying probability {0} is outside [0, 1]")]
    LieOutOfRange(f64),

    #[error("price {price} is below mu = {mu}")]
    PriceBelowMu { price: f64, mu: f64 },

    #[error("extremal market requires a nonempty, in-range index subset")]
    InvalidSubset,

    #[error("segmentation stalled with residual mass {0}")]
    ResidualStall(f64),

    #[error("constraint for type index {0} has zero tail mass")]
    ZeroTail(usize),

    #[error("policy is not lowest-type-targeting")]
    NotLowestTypeTargeting,

    #[error("instance has no repeated-game parameters")]
    MissingRepeated,

    #[error("inconsistent policy: {0}")]
    InconsistentPolicy(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
