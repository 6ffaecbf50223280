use thiserror::Error;

/// Errors raised by model validation, simulation and the solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{check} does not apply: {reason}")]
    NotApplicable { check: &'static str, reason: String },

    #[error("time step {dt:e} too coarse for epsilon {epsilon}; need dt <= {required:e}")]
    StepTooCoarse {
        dt: f64,
        epsilon: f64,
        required: f64,
    },

    #[error("stability restriction violated ({rule}): dt = {dt:e}, suggested dt <= {suggested:e}")]
    Unstable {
        rule: &'static str,
        dt: f64,
        suggested: f64,
    },

    #[error("numerical blow-up at step {step}: {detail}")]
    Blowup { step: usize, detail: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("recurrence condition not verified: {0}")]
    RecurrenceUnverified(String),

    #[error("empty input: {0}")]
    Empty(&'static str),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
