use crate::model::{InteractionMode, Observation, RobotAction};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("state index {state} out of range for a model with {n_states} states")]
    StateOutOfRange { state: usize, n_states: usize },

    #[error("action {action} is not legal when mode is {mode}")]
    IllegalAction {
        mode: InteractionMode,
        action: RobotAction,
    },

    #[error("observation {obs} cannot occur when mode is {mode}")]
    IllegalObservation {
        mode: InteractionMode,
        obs: Observation,
    },

    #[error("impossible evidence: observation {obs} after {action} has zero probability under the current belief")]
    ImpossibleEvidence {
        action: RobotAction,
        obs: Observation,
    },

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("invalid belief: {0}")]
    InvalidBelief(String),

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("invalid reward specification: {0}")]
    InvalidReward(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("illegal event in trajectory {trajectory}, round {round}: {message}")]
    Legality {
        trajectory: String,
        round: usize,
        message: String,
    },

    #[error("fit failed on trajectory {trajectory}, event {event}: {message}")]
    Fit {
        trajectory: usize,
        event: usize,
        message: String,
    },

    #[error("horizon {len} exceeds the exact solver limit of {max}")]
    HorizonTooLong { len: usize, max: usize },

    #[error("policy was built for model {expected} but the supplied model is {found}")]
    FingerprintMismatch { expected: String, found: String },

    #[error("out-of-order request: {0}")]
    OutOfOrder(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
