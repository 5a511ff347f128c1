//! Domain types of the latent-state POMDP, the reward model and the belief
//! filter.
//!
//! States are indexed `0..n_states` from least to most prosocial. The
//! transition tensor is stored for all four robot actions; which actions are
//! legal in a given round is decided by the [`InteractionMode`], not by the
//! parameters.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Tolerance for stochastic-row sums in [`validate`].
pub const ROW_SUM_TOL: f64 = 1e-9;
/// Tolerance for belief normalization.
pub const BELIEF_SUM_TOL: f64 = 1e-12;

/// Which agent needs help in the current round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InteractionMode {
    /// The human is trapped; the robot chooses help / no-help.
    #[serde(rename = "H")]
    HNeedsHelp,
    /// The robot is trapped; the robot chooses signal / no-signal and the
    /// human's response is observed.
    #[serde(rename = "R")]
    RNeedsHelp,
}

impl InteractionMode {
    pub const ALL: [InteractionMode; 2] = [InteractionMode::HNeedsHelp, InteractionMode::RNeedsHelp];

    pub fn index(self) -> usize {
        match self {
            InteractionMode::HNeedsHelp => 0,
            InteractionMode::RNeedsHelp => 1,
        }
    }

    /// Legal actions, costly action first.
    pub fn actions(self) -> [RobotAction; 2] {
        match self {
            InteractionMode::HNeedsHelp => [RobotAction::Help, RobotAction::NoHelp],
            InteractionMode::RNeedsHelp => [RobotAction::Signal, RobotAction::NoSignal],
        }
    }

    /// Observations that can follow an action in this mode.
    pub fn observations(self) -> &'static [Observation] {
        match self {
            InteractionMode::HNeedsHelp => &[Observation::None],
            InteractionMode::RNeedsHelp => &[Observation::HumanHelped, Observation::HumanDidNotHelp],
        }
    }

    pub fn other(self) -> InteractionMode {
        match self {
            InteractionMode::HNeedsHelp => InteractionMode::RNeedsHelp,
            InteractionMode::RNeedsHelp => InteractionMode::HNeedsHelp,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            InteractionMode::HNeedsHelp => "H",
            InteractionMode::RNeedsHelp => "R",
        }
    }

    pub fn parse(s: &str) -> Option<InteractionMode> {
        match s.trim() {
            "H" | "h" => Some(InteractionMode::HNeedsHelp),
            "R" | "r" => Some(InteractionMode::RNeedsHelp),
            _ => None,
        }
    }
}

impl fmt::Display for InteractionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RobotAction {
    #[serde(rename = "help")]
    Help,
    #[serde(rename = "no-help")]
    NoHelp,
    #[serde(rename = "signal")]
    Signal,
    #[serde(rename = "no-signal")]
    NoSignal,
}

impl RobotAction {
    /// Order of the action axis in the transition tensor.
    pub const ALL: [RobotAction; 4] = [
        RobotAction::Help,
        RobotAction::NoHelp,
        RobotAction::Signal,
        RobotAction::NoSignal,
    ];

    pub fn index(self) -> usize {
        match self {
            RobotAction::Help => 0,
            RobotAction::NoHelp => 1,
            RobotAction::Signal => 2,
            RobotAction::NoSignal => 3,
        }
    }

    /// Index on the action axis of the observation matrix, which only covers
    /// the R-mode actions.
    pub fn observation_index(self) -> Option<usize> {
        match self {
            RobotAction::Signal => Some(0),
            RobotAction::NoSignal => Some(1),
            _ => None,
        }
    }

    pub fn mode(self) -> InteractionMode {
        match self {
            RobotAction::Help | RobotAction::NoHelp => InteractionMode::HNeedsHelp,
            RobotAction::Signal | RobotAction::NoSignal => InteractionMode::RNeedsHelp,
        }
    }

    pub fn is_legal(self, mode: InteractionMode) -> bool {
        self.mode() == mode
    }

    /// Help and Signal carry a cost; the other two are free.
    pub fn is_costly(self) -> bool {
        matches!(self, RobotAction::Help | RobotAction::Signal)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RobotAction::Help => "help",
            RobotAction::NoHelp => "no-help",
            RobotAction::Signal => "signal",
            RobotAction::NoSignal => "no-signal",
        }
    }

    pub fn parse(s: &str) -> Option<RobotAction> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "help" => Some(RobotAction::Help),
            "no-help" | "nohelp" => Some(RobotAction::NoHelp),
            "signal" => Some(RobotAction::Signal),
            "no-signal" | "nosignal" => Some(RobotAction::NoSignal),
            _ => None,
        }
    }
}

impl fmt::Display for RobotAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Observation {
    #[serde(rename = "help")]
    HumanHelped,
    #[serde(rename = "no-help")]
    HumanDidNotHelp,
    /// The null observation of H-mode rounds.
    #[serde(rename = "none")]
    None,
}

impl Observation {
    /// Index on the observation axis of the observation matrix.
    pub fn index(self) -> Option<usize> {
        match self {
            Observation::HumanHelped => Some(0),
            Observation::HumanDidNotHelp => Some(1),
            Observation::None => None,
        }
    }

    pub fn is_legal(self, mode: InteractionMode) -> bool {
        match mode {
            InteractionMode::HNeedsHelp => self == Observation::None,
            InteractionMode::RNeedsHelp => self != Observation::None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Observation::HumanHelped => "help",
            Observation::HumanDidNotHelp => "no-help",
            Observation::None => "none",
        }
    }

    pub fn parse(s: &str) -> Option<Observation> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "help" => Some(Observation::HumanHelped),
            "no-help" | "nohelp" => Some(Observation::HumanDidNotHelp),
            "none" | "" => Some(Observation::None),
            _ => None,
        }
    }
}

impl fmt::Display for Observation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A probability distribution over latent prosocial states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Belief(Vec<f64>);

impl Belief {
    pub fn new(probs: Vec<f64>) -> Result<Belief> {
        if probs.is_empty() {
            return Err(Error::InvalidBelief("empty distribution".into()));
        }
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidBelief(format!("entry {i} = {p} is outside [0, 1]")));
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > BELIEF_SUM_TOL {
            return Err(Error::InvalidBelief(format!("entries sum to {sum}")));
        }
        Ok(Belief(probs))
    }

    /// Normalizes non-negative weights into a belief.
    pub fn from_weights(weights: Vec<f64>) -> Result<Belief> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidBelief("weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidBelief("weights sum to zero".into()));
        }
        Ok(Belief(weights.into_iter().map(|w| (w / total).min(1.0)).collect()))
    }

    pub fn uniform(n: usize) -> Belief {
        assert!(n > 0, "belief over zero states");
        Belief(vec![1.0 / n as f64; n])
    }

    /// All mass on one state.
    pub fn point(n: usize, state: usize) -> Belief {
        let mut p = vec![0.0; n];
        p[state] = 1.0;
        Belief(p)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Belief-weighted state index, i.e. the expected prosocial level.
    pub fn expected_level(&self) -> f64 {
        self.0.iter().enumerate().map(|(i, p)| i as f64 * p).sum()
    }

    pub fn dot(&self, values: &[f64]) -> f64 {
        self.0.iter().zip(values).map(|(p, v)| p * v).sum()
    }
}

impl TryFrom<Vec<f64>> for Belief {
    type Error = Error;

    fn try_from(value: Vec<f64>) -> Result<Belief> {
        Belief::new(value)
    }
}

impl From<Belief> for Vec<f64> {
    fn from(b: Belief) -> Vec<f64> {
        b.0
    }
}

/// Transition tensor, observation matrix and initial belief.
///
/// `transition[s][a][s']` uses the action order of [`RobotAction::ALL`];
/// `observation[s][a][o]` covers only `[signal, no-signal]` × `[help, no-help]`.
/// In H-mode rounds the null observation has probability one and is not
/// stored.
/// `labels` may be omitted from a document, in which case the default
/// labels are filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "ModelDocument")]
pub struct ModelParams {
    pub n_states: usize,
    #[serde(rename = "labels")]
    pub state_labels: Vec<String>,
    pub transition: Vec<Vec<Vec<f64>>>,
    pub observation: Vec<Vec<Vec<f64>>>,
    pub initial_belief: Belief,
}

#[derive(Deserialize)]
struct ModelDocument {
    n_states: usize,
    #[serde(default)]
    labels: Option<Vec<String>>,
    transition: Vec<Vec<Vec<f64>>>,
    observation: Vec<Vec<Vec<f64>>>,
    initial_belief: Belief,
}

impl From<ModelDocument> for ModelParams {
    fn from(d: ModelDocument) -> Self {
        ModelParams {
            state_labels: d.labels.unwrap_or_else(|| default_labels(d.n_states)),
            n_states: d.n_states,
            transition: d.transition,
            observation: d.observation,
            initial_belief: d.initial_belief,
        }
    }
}

impl ModelParams {
    /// Builds params and rejects any error-severity violation.
    pub fn new(
        transition: Vec<Vec<Vec<f64>>>,
        observation: Vec<Vec<Vec<f64>>>,
        initial_belief: Belief,
    ) -> Result<ModelParams> {
        let n_states = initial_belief.len();
        let params = ModelParams {
            n_states,
            state_labels: default_labels(n_states),
            transition,
            observation,
            initial_belief,
        };
        params.check()?;
        Ok(params)
    }

    /// Fails with the first error-severity violation, ignoring warnings.
    pub fn check(&self) -> Result<()> {
        let errors: Vec<String> = validate(self)
            .into_iter()
            .filter(|v| v.severity == Severity::Error)
            .map(|v| v.to_string())
            .collect();
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(errors.join("; ")))
        }
    }

    pub fn from_json(text: &str) -> Result<ModelParams> {
        let params: ModelParams = serde_json::from_str(text)?;
        params.check()?;
        Ok(params)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("params serialize")
    }

    /// SHA-256 of the canonical JSON encoding, hex encoded.
    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("params serialize");
        hex::encode(Sha256::digest(&bytes))
    }

    #[inline]
    pub fn t(&self, s: usize, action: RobotAction, next: usize) -> f64 {
        self.transition[s][action.index()][next]
    }

    pub fn transition_row(&self, s: usize, action: RobotAction) -> &[f64] {
        &self.transition[s][action.index()]
    }

    /// Emission factor of `obs` from current state `s`, including the
    /// Kronecker delta on the null observation in H-mode.
    #[inline]
    pub fn observation_prob(
        &self,
        s: usize,
        mode: InteractionMode,
        action: RobotAction,
        obs: Observation,
    ) -> f64 {
        match mode {
            InteractionMode::HNeedsHelp => {
                if obs == Observation::None {
                    1.0
                } else {
                    0.0
                }
            }
            InteractionMode::RNeedsHelp => match (action.observation_index(), obs.index()) {
                (Some(a), Some(o)) => self.observation[s][a][o],
                _ => 0.0,
            },
        }
    }

    /// Probability that the human helps when the robot is trapped, summed over
    /// both R-mode actions. States are ordered by this quantity.
    pub fn help_score(&self, s: usize) -> f64 {
        self.observation[s][0][0] + self.observation[s][1][0]
    }

    /// Reorders states by the permutation `order` (new index `i` holds old
    /// state `order[i]`).
    pub fn permuted(&self, order: &[usize]) -> ModelParams {
        let n = self.n_states;
        assert_eq!(order.len(), n);
        let mut inverse = vec![0; n];
        for (new, &old) in order.iter().enumerate() {
            inverse[old] = new;
        }
        let transition = order
            .iter()
            .map(|&old| {
                self.transition[old]
                    .iter()
                    .map(|row| {
                        let mut out = vec![0.0; n];
                        for (old_next, &p) in row.iter().enumerate() {
                            out[inverse[old_next]] = p;
                        }
                        out
                    })
                    .collect()
            })
            .collect();
        let observation = order.iter().map(|&old| self.observation[old].clone()).collect();
        let b0 = order.iter().map(|&old| self.initial_belief.probs()[old]).collect();
        let state_labels = if self.state_labels.len() == n {
            self.state_labels.clone()
        } else {
            default_labels(n)
        };
        ModelParams {
            n_states: n,
            state_labels,
            transition,
            observation,
            initial_belief: Belief(b0),
        }
    }
}

pub fn default_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("s{i}")).collect()
}

/// Expected state distribution after taking `action` from belief `b`.
pub fn predict(params: &ModelParams, b: &[f64], action: RobotAction) -> Vec<f64> {
    let n = params.n_states;
    let mut next = vec![0.0; n];
    for (s, &p) in b.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for (sn, &t) in params.transition_row(s, action).iter().enumerate() {
            next[sn] += p * t;
        }
    }
    next
}

/// Probability of `obs` under belief `b` for the given mode and action.
pub fn observation_likelihood(
    params: &ModelParams,
    b: &[f64],
    mode: InteractionMode,
    action: RobotAction,
    obs: Observation,
) -> f64 {
    b.iter()
        .enumerate()
        .map(|(s, p)| p * params.observation_prob(s, mode, action, obs))
        .sum()
}

pub(crate) fn check_legal(mode: InteractionMode, action: RobotAction, obs: Observation) -> Result<()> {
    if !action.is_legal(mode) {
        return Err(Error::IllegalAction { mode, action });
    }
    if !obs.is_legal(mode) {
        return Err(Error::IllegalObservation { mode, obs });
    }
    Ok(())
}

/// One round of belief tracking: condition on the observation emitted from
/// the current state, then push the filtered belief through the transition
/// model of the chosen action.
pub fn belief_update(
    params: &ModelParams,
    b: &Belief,
    mode: InteractionMode,
    action: RobotAction,
    obs: Observation,
) -> Result<Belief> {
    check_legal(mode, action, obs)?;
    if b.len() != params.n_states {
        return Err(Error::DimensionMismatch {
            what: "belief".into(),
            expected: params.n_states,
            found: b.len(),
        });
    }
    let filtered: Vec<f64> = match mode {
        InteractionMode::HNeedsHelp => b.probs().to_vec(),
        InteractionMode::RNeedsHelp => {
            let weighted: Vec<f64> = b
                .probs()
                .iter()
                .enumerate()
                .map(|(s, p)| p * params.observation_prob(s, mode, action, obs))
                .collect();
            let evidence: f64 = weighted.iter().sum();
            if evidence <= 0.0 {
                return Err(Error::ImpossibleEvidence { action, obs });
            }
            weighted.into_iter().map(|w| w / evidence).collect()
        }
    };
    let next = predict(params, &filtered, action);
    Belief::from_weights(next)
}

/// Prosocial component of the reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProsocialReward {
    /// `exp(r * x_s) - exp(r * x_0)` for per-state scores `x_s`.
    Exponential { r: f64, scores: Vec<f64> },
    /// Explicit per-state values, used as given.
    Table { prosocial_values: Vec<f64> },
}

/// Action costs, prosocial reward and discount.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardSpec {
    pub c_help: f64,
    pub c_signal: f64,
    #[serde(flatten)]
    pub prosocial: ProsocialReward,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

fn default_gamma() -> f64 {
    0.95
}

/// Per-state prosocial scores used by the reference reward.
pub const DEFAULT_SCORES: [f64; 4] = [45.0, 48.0, 56.0, 67.0];
/// Prosocial scores for an `n`-state model: the reference scores when
/// `n = 4`, otherwise evenly spaced over the same range.
pub fn default_scores(n: usize) -> Vec<f64> {
    if n == DEFAULT_SCORES.len() {
        return DEFAULT_SCORES.to_vec();
    }
    let (lo, hi) = (DEFAULT_SCORES[0], DEFAULT_SCORES[3]);
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

pub const DEFAULT_R: f64 = 0.06;
pub const DEFAULT_COST: f64 = 15.0;
pub const DEFAULT_GAMMA: f64 = 0.95;

impl RewardSpec {
    pub fn exponential(r: f64, scores: Vec<f64>, c_help: f64, c_signal: f64, gamma: f64) -> Result<RewardSpec> {
        let spec = RewardSpec {
            c_help,
            c_signal,
            prosocial: ProsocialReward::Exponential { r, scores },
            gamma,
        };
        spec.check()?;
        Ok(spec)
    }

    pub fn tabulated(values: Vec<f64>, c_help: f64, c_signal: f64, gamma: f64) -> Result<RewardSpec> {
        let spec = RewardSpec {
            c_help,
            c_signal,
            prosocial: ProsocialReward::Table { prosocial_values: values },
            gamma,
        };
        spec.check()?;
        Ok(spec)
    }

    /// r = 0.06, scores (45, 48, 56, 67), both costs 15, gamma 0.95.
    pub fn reference() -> RewardSpec {
        RewardSpec::exponential(DEFAULT_R, DEFAULT_SCORES.to_vec(), DEFAULT_COST, DEFAULT_COST, DEFAULT_GAMMA)
            .expect("reference reward is valid")
    }

    pub fn n_states(&self) -> usize {
        match &self.prosocial {
            ProsocialReward::Exponential { scores, .. } => scores.len(),
            ProsocialReward::Table { prosocial_values } => prosocial_values.len(),
        }
    }

    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidReward(m));
        if !(self.c_help.is_finite() && self.c_help >= 0.0) {
            return bad(format!("c_help = {} must be non-negative", self.c_help));
        }
        if !(self.c_signal.is_finite() && self.c_signal >= 0.0) {
            return bad(format!("c_signal = {} must be non-negative", self.c_signal));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad(format!("gamma = {} must lie in [0, 1)", self.gamma));
        }
        let (values, ordered) = match &self.prosocial {
            ProsocialReward::Exponential { r, scores } => {
                if !(r.is_finite() && *r >= 0.0) {
                    return bad(format!("r = {r} must be non-negative"));
                }
                (scores, true)
            }
            ProsocialReward::Table { prosocial_values } => (prosocial_values, false),
        };
        if values.is_empty() {
            return bad("no per-state scores".into());
        }
        if values.iter().any(|v| !v.is_finite()) {
            return bad("scores must be finite".into());
        }
        if ordered && values.windows(2).any(|w| w[1] < w[0]) {
            return bad("per-state scores must be non-decreasing in state index".into());
        }
        Ok(())
    }

    /// Prosocial reward of a state, zero for the least prosocial state.
    pub fn prosocial_value(&self, state: usize) -> Result<f64> {
        let n = self.n_states();
        if state >= n {
            return Err(Error::StateOutOfRange { state, n_states: n });
        }
        Ok(match &self.prosocial {
            ProsocialReward::Exponential { r, scores } => (r * scores[state]).exp() - (r * scores[0]).exp(),
            ProsocialReward::Table { prosocial_values } => prosocial_values[state],
        })
    }

    pub fn prosocial_values(&self) -> Vec<f64> {
        (0..self.n_states())
            .map(|s| self.prosocial_value(s).expect("index in range"))
            .collect()
    }

    pub fn action_cost(&self, action: RobotAction) -> f64 {
        match action {
            RobotAction::Help => self.c_help,
            RobotAction::Signal => self.c_signal,
            RobotAction::NoHelp | RobotAction::NoSignal => 0.0,
        }
    }

    pub fn reward(&self, state: usize, action: RobotAction) -> Result<f64> {
        Ok(self.prosocial_value(state)? - self.action_cost(action))
    }

    /// Same reward with both costs and the exponent replaced.
    pub fn with_costs(&self, c_help: f64, c_signal: f64) -> RewardSpec {
        RewardSpec {
            c_help,
            c_signal,
            ..self.clone()
        }
    }

    pub fn with_r(&self, r: f64) -> RewardSpec {
        let prosocial = match &self.prosocial {
            ProsocialReward::Exponential { scores, .. } => ProsocialReward::Exponential {
                r,
                scores: scores.clone(),
            },
            other => other.clone(),
        };
        RewardSpec {
            prosocial,
            ..self.clone()
        }
    }

    /// Per-state rewards for one action, precomputed for inner loops.
    pub fn reward_vector(&self, action: RobotAction) -> Vec<f64> {
        let cost = self.action_cost(action);
        self.prosocial_values().into_iter().map(|v| v - cost).collect()
    }
}

/// `R(s, a) = -C_help [a = help] - C_signal [a = signal] + R_prosocial(s)`.
pub fn reward(spec: &RewardSpec, state: usize, action: RobotAction) -> Result<f64> {
    spec.reward(state, action)
}

/// One logged round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionEvent {
    pub round_index: usize,
    pub mode: InteractionMode,
    pub action: RobotAction,
    pub observation: Observation,
}

impl InteractionEvent {
    pub fn new(
        round_index: usize,
        mode: InteractionMode,
        action: RobotAction,
        observation: Observation,
    ) -> Result<InteractionEvent> {
        check_legal(mode, action, observation)?;
        Ok(InteractionEvent {
            round_index,
            mode,
            action,
            observation,
        })
    }

    pub fn check(&self) -> Result<()> {
        check_legal(self.mode, self.action, self.observation)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub severity: Severity,
    pub message: String,
}

impl Violation {
    fn error(message: String) -> Violation {
        Violation {
            severity: Severity::Error,
            message,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{tag}: {}", self.message)
    }
}

const OBS_ACTIONS: [RobotAction; 2] = [RobotAction::Signal, RobotAction::NoSignal];

fn check_row(out: &mut Vec<Violation>, table: &str, s: usize, action: RobotAction, row: &[f64], width: usize) {
    if row.len() != width {
        out.push(Violation::error(format!(
            "{table}[s{s}][{action}] has {} entries, expected {width}",
            row.len()
        )));
        return;
    }
    let mut sane = true;
    for (i, &p) in row.iter().enumerate() {
        if !p.is_finite() || p < 0.0 {
            sane = false;
            out.push(Violation::error(format!("{table}[s{s}][{action}][{i}] = {p} is negative or not finite")));
        }
    }
    let sum: f64 = row.iter().sum();
    if sane && (sum - 1.0).abs() > ROW_SUM_TOL {
        out.push(Violation::error(format!("{table}[s{s}][{action}] sums to {sum}, not 1")));
    }
}

/// Lists every invariant violation. An out-of-order state labelling (help
/// probability not non-decreasing in state index) is reported as a warning.
pub fn validate(params: &ModelParams) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = params.n_states;
    if n == 0 {
        out.push(Violation::error("n_states must be positive".into()));
        return out;
    }
    if params.state_labels.len() != n {
        out.push(Violation::error(format!(
            "{} labels for {n} states",
            params.state_labels.len()
        )));
    }
    if params.initial_belief.len() != n {
        out.push(Violation::error(format!(
            "initial_belief has {} entries, expected {n}",
            params.initial_belief.len()
        )));
    }
    let mut shape_ok = true;
    if params.transition.len() != n {
        shape_ok = false;
        out.push(Violation::error(format!(
            "transition has {} source states, expected {n}",
            params.transition.len()
        )));
    } else {
        for (s, by_action) in params.transition.iter().enumerate() {
            if by_action.len() != RobotAction::ALL.len() {
                shape_ok = false;
                out.push(Violation::error(format!(
                    "transition[s{s}] has {} actions, expected 4",
                    by_action.len()
                )));
                continue;
            }
            for (a, row) in RobotAction::ALL.iter().zip(by_action) {
                check_row(&mut out, "transition", s, *a, row, n);
            }
        }
    }
    if params.observation.len() != n {
        shape_ok = false;
        out.push(Violation::error(format!(
            "observation has {} states, expected {n}",
            params.observation.len()
        )));
    } else {
        for (s, by_action) in params.observation.iter().enumerate() {
            if by_action.len() != OBS_ACTIONS.len() {
                shape_ok = false;
                out.push(Violation::error(format!(
                    "observation[s{s}] has {} actions, expected 2",
                    by_action.len()
                )));
                continue;
            }
            for (a, row) in OBS_ACTIONS.iter().zip(by_action) {
                if row.len() != 2 {
                    shape_ok = false;
                }
                check_row(&mut out, "observation", s, *a, row, 2);
            }
        }
    }
    if shape_ok {
        let scores: Vec<f64> = (0..n).map(|s| params.help_score(s)).collect();
        if let Some(i) = scores.windows(2).position(|w| w[1] < w[0]) {
            out.push(Violation {
                severity: Severity::Warning,
                message: format!(
                    "states are not ordered by prosociality: help probability of s{} ({:.4}) exceeds s{} ({:.4})",
                    i,
                    scores[i],
                    i + 1,
                    scores[i + 1]
                ),
            });
        }
    }
    out
}
