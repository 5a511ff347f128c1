//! Latent prosocial-state POMDP toolkit.
//!
//! A robot and a human take turns needing help. The human's disposition to
//! help is a hidden, ordinal state that drifts in response to the robot's
//! actions. This crate provides:
//!
//! - [`model`]: domain types, the reward function and the belief filter.
//! - [`trajectory`]: JSONL/CSV interaction logs and the built-in mode schedules.
//! - [`em`]: Baum-Welch estimation with action-conditioned transitions and
//!   mode-gated observations, random restarts and model selection.
//! - [`planner`]: an exact finite-horizon belief-tree solver and a point-based
//!   alpha-vector solver over the (latent state × mode) space.
//! - [`policy`]: the learned policy plus four baselines behind one interface.
//! - [`sim`]: episode simulation, paired policy comparison and the reward/cost
//!   sensitivity sweep.
//! - [`session`]: the two-phase act/observe session state machine used by the
//!   HTTP service.

// Index loops mirror the matrix notation, and negated comparisons are used
// on purpose so that NaN fails the check.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod em;
pub mod error;
pub mod fixtures;
pub mod model;
pub mod planner;
pub mod policy;
pub mod session;
pub mod sim;
pub mod trajectory;

pub use error::{Error, Result};
pub use model::{
    belief_update, reward, validate, Belief, InteractionEvent, InteractionMode, ModelParams,
    Observation, ProsocialReward, RewardSpec, RobotAction, Severity, Violation,
};
