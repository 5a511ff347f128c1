//! Robot decision rules behind one interface: the planned policy and the four
//! baselines.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{predict, Belief, InteractionMode, ModelParams, Observation, RewardSpec, RobotAction};
use crate::planner::{strictly_better, AlphaVectorPolicy};

/// What the reciprocal baseline does before it has seen any human response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReactiveStart {
    /// No-help / no-signal.
    #[default]
    Neutral,
    /// Help / signal.
    Cooperative,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PolicyKind {
    AlwaysHelpSignal,
    NeverHelpSignal,
    /// One-step lookahead on the prosocial reward of the next state.
    MyopicGreedy,
    /// Help after the human last helped; signal after the human last did not.
    ReciprocalReactive(ReactiveStart),
    LsPomdp(Box<AlphaVectorPolicy>),
}

impl PolicyKind {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::AlwaysHelpSignal => "always",
            PolicyKind::NeverHelpSignal => "never",
            PolicyKind::MyopicGreedy => "myopic",
            PolicyKind::ReciprocalReactive(_) => "reactive",
            PolicyKind::LsPomdp(_) => "lspomdp",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Baseline names as used on the command line and by the service.
/// `lspomdp` needs a solved policy and is not constructible from a name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyName {
    Always,
    Never,
    Myopic,
    Reactive,
    Lspomdp,
}

impl FromStr for PolicyName {
    type Err = Error;

    fn from_str(s: &str) -> Result<PolicyName> {
        match s.trim().to_ascii_lowercase().as_str() {
            "always" => Ok(PolicyName::Always),
            "never" => Ok(PolicyName::Never),
            "myopic" => Ok(PolicyName::Myopic),
            "reactive" => Ok(PolicyName::Reactive),
            "lspomdp" => Ok(PolicyName::Lspomdp),
            other => Err(Error::InvalidConfig(format!(
                "unknown policy {other:?} (expected always, never, myopic, reactive or lspomdp)"
            ))),
        }
    }
}

impl PolicyName {
    pub fn baseline(self) -> Option<PolicyKind> {
        match self {
            PolicyName::Always => Some(PolicyKind::AlwaysHelpSignal),
            PolicyName::Never => Some(PolicyKind::NeverHelpSignal),
            PolicyName::Myopic => Some(PolicyKind::MyopicGreedy),
            PolicyName::Reactive => Some(PolicyKind::ReciprocalReactive(ReactiveStart::Neutral)),
            PolicyName::Lspomdp => None,
        }
    }
}

/// Everything a policy may look at when choosing an action.
#[derive(Debug, Clone, Copy)]
pub struct DecisionContext<'a> {
    pub belief: &'a Belief,
    pub mode: InteractionMode,
    /// Most recent human response from an R-mode round, if any. Persists
    /// through H-mode rounds.
    pub last_response: Option<Observation>,
    pub round: usize,
    pub params: &'a ModelParams,
    pub reward: &'a RewardSpec,
}

/// Greedy score: expected immediate reward plus the undiscounted
/// expected prosocial reward of the next state.
pub fn myopic_score(params: &ModelParams, reward: &RewardSpec, b: &Belief, action: RobotAction) -> f64 {
    let immediate = b.dot(&reward.reward_vector(action));
    let next = predict(params, b.probs(), action);
    immediate + next.iter().zip(reward.prosocial_values()).map(|(p, v)| p * v).sum::<f64>()
}

impl PolicyKind {
    pub fn act(&self, ctx: &DecisionContext) -> Result<RobotAction> {
        let [costly, free] = ctx.mode.actions();
        let action = match self {
            PolicyKind::AlwaysHelpSignal => costly,
            PolicyKind::NeverHelpSignal => free,
            PolicyKind::MyopicGreedy => {
                if ctx.belief.len() != ctx.params.n_states {
                    return Err(Error::DimensionMismatch {
                        what: "belief".into(),
                        expected: ctx.params.n_states,
                        found: ctx.belief.len(),
                    });
                }
                let c = myopic_score(ctx.params, ctx.reward, ctx.belief, costly);
                let f = myopic_score(ctx.params, ctx.reward, ctx.belief, free);
                if strictly_better(c, f) {
                    costly
                } else {
                    free
                }
            }
            PolicyKind::ReciprocalReactive(start) => {
                let cooperate = match (ctx.mode, ctx.last_response) {
                    (InteractionMode::HNeedsHelp, Some(o)) => o == Observation::HumanHelped,
                    (InteractionMode::RNeedsHelp, Some(o)) => o == Observation::HumanDidNotHelp,
                    (_, None) => *start == ReactiveStart::Cooperative,
                };
                if cooperate {
                    costly
                } else {
                    free
                }
            }
            PolicyKind::LsPomdp(policy) => policy.action_at(ctx.belief, ctx.mode, ctx.round)?,
        };
        debug_assert!(action.is_legal(ctx.mode));
        Ok(action)
    }
}

/// Functional form of [`PolicyKind::act`].
pub fn act(kind: &PolicyKind, ctx: &DecisionContext) -> Result<RobotAction> {
    kind.act(ctx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::fixture_a;
    use approx::assert_abs_diff_eq;
    use InteractionMode::{HNeedsHelp as H, RNeedsHelp as R};

    fn ctx<'a>(
        b: &'a Belief,
        mode: InteractionMode,
        last: Option<Observation>,
        p: &'a ModelParams,
        r: &'a RewardSpec,
    ) -> DecisionContext<'a> {
        DecisionContext {
            belief: b,
            mode,
            last_response: last,
            round: 0,
            params: p,
            reward: r,
        }
    }

    #[test]
    fn myopic_by_hand() {
        let p = fixture_a();
        let r = RewardSpec::tabulated(vec![0.0, 10.0], 15.0, 15.0, 0.95).unwrap();
        let b = Belief::uniform(2);
        assert_abs_diff_eq!(myopic_score(&p, &r, &b, RobotAction::Help), -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(myopic_score(&p, &r, &b, RobotAction::NoHelp), 8.0, epsilon = 1e-12);
        assert_eq!(
            PolicyKind::MyopicGreedy.act(&ctx(&b, H, None, &p, &r)).unwrap(),
            RobotAction::NoHelp
        );
    }

    #[test]
    fn reactive_rules() {
        let p = fixture_a();
        let r = RewardSpec::tabulated(vec![0.0, 10.0], 15.0, 15.0, 0.95).unwrap();
        let b = Belief::uniform(2);
        let k = PolicyKind::ReciprocalReactive(ReactiveStart::Neutral);
        let helped = Some(Observation::HumanHelped);
        let refused = Some(Observation::HumanDidNotHelp);
        assert_eq!(k.act(&ctx(&b, H, helped, &p, &r)).unwrap(), RobotAction::Help);
        assert_eq!(k.act(&ctx(&b, H, refused, &p, &r)).unwrap(), RobotAction::NoHelp);
        assert_eq!(k.act(&ctx(&b, R, refused, &p, &r)).unwrap(), RobotAction::Signal);
        assert_eq!(k.act(&ctx(&b, R, helped, &p, &r)).unwrap(), RobotAction::NoSignal);
        assert_eq!(k.act(&ctx(&b, H, None, &p, &r)).unwrap(), RobotAction::NoHelp);
        assert_eq!(k.act(&ctx(&b, R, None, &p, &r)).unwrap(), RobotAction::NoSignal);
        let coop = PolicyKind::ReciprocalReactive(ReactiveStart::Cooperative);
        assert_eq!(coop.act(&ctx(&b, H, None, &p, &r)).unwrap(), RobotAction::Help);
    }

    #[test]
    fn fixed_baselines() {
        let p = fixture_a();
        let r = RewardSpec::tabulated(vec![0.0, 10.0], 15.0, 15.0, 0.95).unwrap();
        let b = Belief::uniform(2);
        assert_eq!(PolicyKind::NeverHelpSignal.act(&ctx(&b, R, None, &p, &r)).unwrap(), RobotAction::NoSignal);
        assert_eq!(PolicyKind::AlwaysHelpSignal.act(&ctx(&b, H, None, &p, &r)).unwrap(), RobotAction::Help);
        assert_eq!(PolicyKind::AlwaysHelpSignal.act(&ctx(&b, R, None, &p, &r)).unwrap(), RobotAction::Signal);
    }

    #[test]
    fn names_parse() {
        for (s, n) in [
            ("always", PolicyName::Always),
            ("never", PolicyName::Never),
            ("myopic", PolicyName::Myopic),
            ("reactive", PolicyName::Reactive),
            ("lspomdp", PolicyName::Lspomdp),
        ] {
            assert_eq!(s.parse::<PolicyName>().unwrap(), n);
        }
        assert!("greedy".parse::<PolicyName>().is_err());
        assert!(PolicyName::Lspomdp.baseline().is_none());
    }
}
