use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid step distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Work would exceed the configured budget (leaf visits or support size).
    #[error("resource budget exceeded: {needed} > {budget} ({what})")]
    Budget {
        what: &'static str,
        needed: f64,
        budget: f64,
    },

    #[error("at least {required} replicas are needed, got {got}")]
    InsufficientReplicas { required: usize, got: usize },

    /// A hypothesis of an analytic statement fails numerically; not a bug.
    #[error("hypothesis not satisfied: {0}")]
    Hypothesis(String),

    #[error("rank-deficient fit: {0}")]
    RankDeficient(String),

    #[error("schedule violates the coupled-limit conditions: {0}")]
    InvalidSchedule(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
