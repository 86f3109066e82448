use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes surfaced by the solver stack.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("running reward is negative at x = {x} (c = {value})")]
    NegativeReward { x: f64, value: f64 },

    #[error("quadrature did not converge on [{lo}, {hi}]: achieved error {achieved:e}, requested {requested:e}")]
    Quadrature {
        lo: f64,
        hi: f64,
        achieved: f64,
        requested: f64,
    },

    #[error("speed measure is not integrable at the left endpoint (M[a, y] appears infinite)")]
    SpeedNotIntegrable,

    #[error("total speed measure is ambiguous: relative tail estimate {tail:e} lies between finite and infinite thresholds; increase b_cut")]
    AmbiguousSpeedTotal { tail: f64 },

    #[error("point {x} lies outside the tabulated range [{lo}, {hi}]")]
    OutOfRange { x: f64, lo: f64, hi: f64 },

    #[error("reflection value h is not unimodal: {0}")]
    NotUnimodal(String),

    #[error("root finding failed: {0}")]
    RootFinding(String),

    #[error("unsupported case: {0}")]
    Unsupported(String),

    #[error("condition failed: {0}")]
    Condition(String),

    #[error("simulation invalid: {capped} of {total} paths hit the step cap")]
    StepCap { capped: usize, total: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// True when the error stems from a violated modelling condition rather than a numerical breakdown.
    pub fn is_condition(&self) -> bool {
        matches!(
            self,
            Error::Condition(_) | Error::SpeedNotIntegrable | Error::NotUnimodal(_) | Error::NegativeReward { .. }
        )
    }
}
