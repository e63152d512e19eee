use thiserror::Error;

/// Errors raised by the decision, duality and verification routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),

    #[error("policy puts mass {mass} on action {index} where the prior is zero")]
    AbsoluteContinuityViolation { index: usize, mass: f64 },

    #[error("log-sum-exp over an empty support (all terms are -inf)")]
    EmptySupport,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("grid resolution {0} does not divide 1 into an integral number of steps")]
    InvalidResolution(f64),

    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("a channel q(y|x) is required for this operation")]
    ChannelRequired,

    #[error("invalid utility: {0}")]
    InvalidUtility(String),

    #[error("invalid exponent {0}: must be > 1")]
    InvalidExponent(f64),

    #[error("function is not finite at grid point {point}")]
    InvalidFunction { point: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error(
        "supremum attained at the grid boundary on coordinates {coordinates:?} (value {value} is untrusted)"
    )]
    BoundaryWarning { value: f64, coordinates: Vec<usize> },

    #[error("invalid inverse temperature {beta}: {reason}")]
    InvalidBeta { beta: f64, reason: &'static str },

    #[error("objective ill-defined: action {index} has positive mass and cost -inf")]
    IllDefinedObjective { index: usize },

    #[error("action {index} has zero policy mass; use the restricted-support cost view")]
    RestrictedSupport { index: usize },

    #[error("invalid cost vector: {0}")]
    InvalidCost(String),

    #[error("invalid regularizer: {0}")]
    InvalidRegularizer(String),

    #[error("utility {utility} at action {index} exceeds the sampler bound {bound}")]
    BoundViolated {
        index: usize,
        utility: f64,
        bound: f64,
    },

    #[error("sampler stalled after {attempts} attempts for a single sample")]
    SamplerStalled { attempts: u64 },

    #[error("oracle budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("unsupported tree shape: {0}")]
    UnsupportedShape(String),

    #[error("invalid decision tree: {0}")]
    InvalidTree(String),
}

pub type Result<T> = std::result::Result<T, Error>;
