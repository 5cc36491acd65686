use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("menu has no pieces")]
    EmptyMenu,

    #[error("invalid belief: {0}")]
    InvalidBelief(String),

    #[error("invalid contract: {0}")]
    InvalidContract(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("outcome {label:?} has zero prior mass; reduce the outcome space first")]
    ZeroMassOutcome { label: String },

    #[error("belief lies outside the convex hull of the action beliefs")]
    OutsideHull,

    #[error("signal is uninformative (value of information {value_of_information}); acquisition cannot be incentivized")]
    Uninformative {
        value_of_information: f64,
        /// Within tolerance of the informative/uninformative boundary.
        marginal: bool,
    },

    #[error("action {action:?} is not elicitable: not on lower boundary (cost curve {curve} < cost {cost})")]
    NotElicitable {
        action: String,
        curve: f64,
        cost: f64,
    },

    #[error("action {action:?} is not strictly elicitable at tolerance (margin {margin})")]
    NotStrictlyElicitable { action: String, margin: f64 },

    #[error("plan is not elicitable: the minimum-payment program is infeasible")]
    PlanNotElicitable,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(transparent)]
    Lp(#[from] crate::lp::LpError),

    #[error("linear program unexpectedly {0}")]
    UnexpectedLpStatus(&'static str),
}
