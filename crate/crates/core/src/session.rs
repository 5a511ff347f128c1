//! Live interaction sessions.
//!
//! A session tracks one robot's belief about one human across rounds. Each
//! round is driven by [`Session::act`]; in R-mode the round stays open until
//! [`Session::observe`] supplies the human's response.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{belief_update, Belief, InteractionEvent, InteractionMode, ModelParams, Observation, RewardSpec, RobotAction};
use crate::policy::{DecisionContext, PolicyKind};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Ready for the next round.
    AwaitingAct,
    /// An R-mode action was issued; waiting for the human's response.
    AwaitingObservation,
    /// The configured mode sequence has been played out.
    Finished,
}

/// One completed round together with the belief it produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    #[serde(flatten)]
    pub event: InteractionEvent,
    pub belief: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActOutcome {
    pub action: RobotAction,
    pub round: usize,
    /// Belief after the round; absent while an R-mode round awaits its
    /// observation.
    pub belief: Option<Vec<f64>>,
    pub awaiting_observation: bool,
}

/// Serializable snapshot of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionTrace {
    pub id: String,
    pub policy: String,
    pub model_fingerprint: String,
    pub initial_belief: Vec<f64>,
    pub belief: Vec<f64>,
    pub phase: Phase,
    pub round: usize,
    pub mode_sequence: Option<Vec<InteractionMode>>,
    pub pending_action: Option<RobotAction>,
    pub last_response: Option<Observation>,
    pub events: Vec<SessionRecord>,
}

#[derive(Debug, Clone)]
pub struct Session {
    pub id: String,
    model: ModelParams,
    policy: PolicyKind,
    reward: RewardSpec,
    belief: Belief,
    mode_sequence: Option<Vec<InteractionMode>>,
    pending: Option<(InteractionMode, RobotAction)>,
    last_response: Option<Observation>,
    log: Vec<SessionRecord>,
}

impl Session {
    pub fn new(
        id: impl Into<String>,
        model: ModelParams,
        policy: PolicyKind,
        reward: RewardSpec,
        mode_sequence: Option<Vec<InteractionMode>>,
    ) -> Result<Session> {
        model.check()?;
        reward.check()?;
        if reward.n_states() != model.n_states {
            return Err(Error::DimensionMismatch {
                what: "reward".into(),
                expected: model.n_states,
                found: reward.n_states(),
            });
        }
        if let PolicyKind::LsPomdp(p) = &policy {
            let found = model.fingerprint();
            if p.model_fingerprint != found {
                return Err(Error::FingerprintMismatch {
                    expected: p.model_fingerprint.clone(),
                    found,
                });
            }
        }
        Ok(Session {
            id: id.into(),
            belief: model.initial_belief.clone(),
            model,
            policy,
            reward,
            mode_sequence,
            pending: None,
            last_response: None,
            log: Vec::new(),
        })
    }

    pub fn belief(&self) -> &Belief {
        &self.belief
    }

    pub fn model(&self) -> &ModelParams {
        &self.model
    }

    pub fn round(&self) -> usize {
        self.log.len()
    }

    pub fn events(&self) -> impl Iterator<Item = &InteractionEvent> {
        self.log.iter().map(|r| &r.event)
    }

    pub fn phase(&self) -> Phase {
        if self.pending.is_some() {
            Phase::AwaitingObservation
        } else if self.mode_sequence.as_ref().is_some_and(|s| self.log.len() >= s.len()) {
            Phase::Finished
        } else {
            Phase::AwaitingAct
        }
    }

    /// Starts round `self.round()` in `mode`. H-mode rounds complete at once.
    /// An R-mode round may be completed in the same call by passing the
    /// observation.
    pub fn act(&mut self, mode: InteractionMode, observation: Option<Observation>) -> Result<ActOutcome> {
        match self.phase() {
            Phase::AwaitingObservation => {
                return Err(Error::OutOfOrder(format!(
                    "round {} is waiting for the human's response",
                    self.round()
                )))
            }
            Phase::Finished => return Err(Error::OutOfOrder("the mode sequence is finished".into())),
            Phase::AwaitingAct => {}
        }
        if let Some(expected) = self.mode_sequence.as_ref().map(|s| s[self.log.len()]) {
            if expected != mode {
                return Err(Error::OutOfOrder(format!(
                    "round {} is scheduled as {expected}, not {mode}",
                    self.round()
                )));
            }
        }
        if let Some(o) = observation {
            if !o.is_legal(mode) {
                return Err(Error::IllegalObservation { mode, obs: o });
            }
        }
        let action = self.policy.act(&DecisionContext {
            belief: &self.belief,
            mode,
            last_response: self.last_response,
            round: self.round(),
            params: &self.model,
            reward: &self.reward,
        })?;
        if !action.is_legal(mode) {
            return Err(Error::IllegalAction { mode, action });
        }
        let round = self.round();
        match (mode, observation) {
            (InteractionMode::HNeedsHelp, _) => {
                self.complete(mode, action, Observation::None)?;
            }
            (InteractionMode::RNeedsHelp, Some(o)) => {
                self.complete(mode, action, o)?;
            }
            (InteractionMode::RNeedsHelp, None) => {
                self.pending = Some((mode, action));
                return Ok(ActOutcome {
                    action,
                    round,
                    belief: None,
                    awaiting_observation: true,
                });
            }
        }
        Ok(ActOutcome {
            action,
            round,
            belief: Some(self.belief.probs().to_vec()),
            awaiting_observation: false,
        })
    }

    /// Closes a pending R-mode round with the human's response.
    pub fn observe(&mut self, obs: Observation) -> Result<&Belief> {
        let Some((mode, action)) = self.pending else {
            return Err(Error::OutOfOrder("no robot action is waiting for an observation".into()));
        };
        if !obs.is_legal(mode) {
            return Err(Error::IllegalObservation { mode, obs });
        }
        self.complete(mode, action, obs)?;
        self.pending = None;
        Ok(&self.belief)
    }

    fn complete(&mut self, mode: InteractionMode, action: RobotAction, obs: Observation) -> Result<()> {
        let event = InteractionEvent::new(self.round(), mode, action, obs)?;
        let next = belief_update(&self.model, &self.belief, mode, action, obs)?;
        self.belief = next;
        if mode == InteractionMode::RNeedsHelp {
            self.last_response = Some(obs);
        }
        self.log.push(SessionRecord {
            event,
            belief: self.belief.probs().to_vec(),
        });
        Ok(())
    }

    /// Latest completed event, if any.
    pub fn last_event(&self) -> Option<&InteractionEvent> {
        self.log.last().map(|r| &r.event)
    }

    pub fn trace(&self) -> SessionTrace {
        SessionTrace {
            id: self.id.clone(),
            policy: self.policy.name().to_string(),
            model_fingerprint: self.model.fingerprint(),
            initial_belief: self.model.initial_belief.probs().to_vec(),
            belief: self.belief.probs().to_vec(),
            phase: self.phase(),
            round: self.round(),
            mode_sequence: self.mode_sequence.clone(),
            pending_action: self.pending.map(|(_, a)| a),
            last_response: self.last_response,
            events: self.log.clone(),
        }
    }

    pub fn to_trajectory(&self) -> Trajectory {
        Trajectory::new(self.id.clone(), self.events().copied().collect())
    }
}

/// Filters a logged event sequence from the model's initial belief.
pub fn replay(model: &ModelParams, events: &[InteractionEvent]) -> Result<Belief> {
    let mut b = model.initial_belief.clone();
    for e in events {
        b = belief_update(model, &b, e.mode, e.action, e.observation)?;
    }
    Ok(b)
}
