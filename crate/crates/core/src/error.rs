use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid type grid: {0}")]
    InvalidGrid(String),

    #[error("type grid does not bracket zero (range [{min}, {max}])")]
    GridDoesNotBracketZero { min: f64, max: f64 },

    #[error("invalid test: {0}")]
    InvalidTest(String),

    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("tests are defined on different type grids")]
    GridMismatch,

    #[error("signal {0} has zero probability mass")]
    ZeroSignalMass(&'static str),

    #[error("candidate test is not a member of the test set")]
    CandidateNotInSet,

    #[error("no root bracketed: cost at lambda=0 is {cost_at_zero}, at lambda=1 is {cost_at_one}, target {target}")]
    NoRootBracketed {
        cost_at_zero: f64,
        cost_at_one: f64,
        target: f64,
    },

    #[error("requires a binary type grid")]
    NotBinary,

    #[error("preconditions not met: {0}")]
    PreconditionFailed(String),

    #[error("no consistent application profile found")]
    NoConsistentProfile,
}

pub type Result<T> = std::result::Result<T, Error>;
