//! Belief-space planning.
//!
//! Two solvers share the same Bellman backup:
//!
//! - [`exact_value`] expands the full action/observation tree over a fixed
//!   mode schedule. It is exact and serves as ground truth for short
//!   horizons.
//! - [`solve_pbvi`] runs point-based value iteration over the augmented
//!   state (latent state, mode), where the mode is observed and the latent
//!   state is not. Vectors are grouped by mode block; a finite horizon keeps
//!   one vector set per stage.
//!
//! Ties between a costly action and its free counterpart resolve to the free
//! action.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    belief_update, observation_likelihood, Belief, InteractionMode, ModelParams, Observation, RewardSpec, RobotAction,
};
use crate::trajectory::ModeSequence;

pub const MAX_EXACT_HORIZON: usize = 12;

/// Relative slack under which two action values count as tied.
pub const TIE_TOL: f64 = 1e-9;

/// True if `costly` beats `free` by more than the tie tolerance.
pub fn strictly_better(costly: f64, free: f64) -> bool {
    costly > free + TIE_TOL * free.abs().max(1.0)
}

/// Value assigned to the belief left after the last scheduled round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalValue {
    /// No salvage value.
    #[default]
    Zero,
    /// Expected prosocial reward of the state reached after the last round,
    /// `sum_s b(s) R_prosocial(s)`, discounted like one more round.
    ProsocialLookahead,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactSolution {
    pub value: f64,
    /// `None` for an empty schedule.
    pub first_action: Option<RobotAction>,
}

struct ExactSolver<'a> {
    params: &'a ModelParams,
    rewards: [Vec<f64>; 4],
    prosocial: Vec<f64>,
    modes: &'a [InteractionMode],
    gamma: f64,
    terminal: TerminalValue,
}

impl ExactSolver<'_> {
    fn value(&self, b: &Belief, k: usize) -> Result<(f64, Option<RobotAction>)> {
        if k == self.modes.len() {
            let v = match self.terminal {
                TerminalValue::Zero => 0.0,
                TerminalValue::ProsocialLookahead => b.dot(&self.prosocial),
            };
            return Ok((v, None));
        }
        let mode = self.modes[k];
        let [costly, free] = mode.actions();
        let q_costly = self.q_value(b, k, costly)?;
        let q_free = self.q_value(b, k, free)?;
        Ok(if strictly_better(q_costly, q_free) {
            (q_costly, Some(costly))
        } else {
            (q_free, Some(free))
        })
    }

    fn q_value(&self, b: &Belief, k: usize, action: RobotAction) -> Result<f64> {
        let mode = self.modes[k];
        let mut q = b.dot(&self.rewards[action.index()]);
        for &obs in mode.observations() {
            let p = observation_likelihood(self.params, b.probs(), mode, action, obs);
            if p <= 0.0 {
                continue;
            }
            let next = belief_update(self.params, b, mode, action, obs)?;
            q += self.gamma * p * self.value(&next, k + 1)?.0;
        }
        Ok(q)
    }
}

fn check_dims(params: &ModelParams, reward: &RewardSpec, b: &Belief) -> Result<()> {
    if reward.n_states() != params.n_states {
        return Err(Error::DimensionMismatch {
            what: "reward scores".into(),
            expected: params.n_states,
            found: reward.n_states(),
        });
    }
    if b.len() != params.n_states {
        return Err(Error::DimensionMismatch {
            what: "belief".into(),
            expected: params.n_states,
            found: b.len(),
        });
    }
    Ok(())
}

/// Exhaustive expectimax over the schedule `modes` with zero terminal value.
pub fn exact_value(
    params: &ModelParams,
    reward: &RewardSpec,
    b: &Belief,
    modes: &[InteractionMode],
    gamma: f64,
) -> Result<ExactSolution> {
    exact_value_with_terminal(params, reward, b, modes, gamma, TerminalValue::Zero)
}

pub fn exact_value_with_terminal(
    params: &ModelParams,
    reward: &RewardSpec,
    b: &Belief,
    modes: &[InteractionMode],
    gamma: f64,
    terminal: TerminalValue,
) -> Result<ExactSolution> {
    if modes.len() > MAX_EXACT_HORIZON {
        return Err(Error::HorizonTooLong {
            len: modes.len(),
            max: MAX_EXACT_HORIZON,
        });
    }
    check_dims(params, reward, b)?;
    let solver = ExactSolver {
        params,
        rewards: RobotAction::ALL.map(|a| reward.reward_vector(a)),
        prosocial: reward.prosocial_values(),
        modes,
        gamma,
        terminal,
    };
    let (value, first_action) = solver.value(b, 0)?;
    Ok(ExactSolution { value, first_action })
}

/// How interaction modes evolve from round to round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModeProcess {
    FixedSequence { sequence: ModeSequence },
    /// Each round independently has the robot trapped with probability `p_r`.
    Iid { p_r: f64 },
    Alternating { start: InteractionMode },
}

impl Default for ModeProcess {
    fn default() -> Self {
        ModeProcess::Alternating {
            start: InteractionMode::HNeedsHelp,
        }
    }
}

impl ModeProcess {
    fn check(&self) -> Result<()> {
        if let ModeProcess::Iid { p_r } = self {
            if !(0.0..=1.0).contains(p_r) {
                return Err(Error::InvalidConfig(format!("p_r = {p_r} is not a probability")));
            }
        }
        Ok(())
    }

    /// Distribution of the mode at round `k`.
    fn modes_at(&self, k: usize) -> Vec<(InteractionMode, f64)> {
        match self {
            ModeProcess::FixedSequence { sequence } => vec![(sequence.modes[k.min(sequence.len() - 1)], 1.0)],
            ModeProcess::Alternating { start } => {
                vec![(if k.is_multiple_of(2) { *start } else { start.other() }, 1.0)]
            }
            ModeProcess::Iid { p_r } => Self::iid(*p_r),
        }
    }

    fn iid(p_r: f64) -> Vec<(InteractionMode, f64)> {
        [(InteractionMode::HNeedsHelp, 1.0 - p_r), (InteractionMode::RNeedsHelp, p_r)]
            .into_iter()
            .filter(|(_, p)| *p > 0.0)
            .collect()
    }

    /// Distribution of the mode at round `k + 1` given mode `m` at round `k`.
    fn next(&self, m: InteractionMode, k: usize) -> Vec<(InteractionMode, f64)> {
        match self {
            ModeProcess::FixedSequence { .. } => self.modes_at(k + 1),
            ModeProcess::Alternating { .. } => vec![(m.other(), 1.0)],
            ModeProcess::Iid { p_r } => Self::iid(*p_r),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanConfig {
    pub gamma: f64,
    /// `None` plans for an unbounded discounted horizon.
    pub horizon: Option<usize>,
    /// Belief points per stage (finite horizon) or in total.
    pub max_belief_points: usize,
    /// Stop once the Bellman residual at every point is below this.
    pub epsilon: f64,
    /// Maximum number of backup sweeps for the unbounded horizon.
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for PlanConfig {
    fn default() -> Self {
        PlanConfig {
            gamma: 0.95,
            horizon: None,
            max_belief_points: 400,
            epsilon: 1e-3,
            max_iterations: 2000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaVector {
    /// Mode block the vector is defined on.
    pub mode: InteractionMode,
    pub action: RobotAction,
    pub values: Vec<f64>,
}

impl AlphaVector {
    pub fn value(&self, b: &[f64]) -> f64 {
        b.iter().zip(&self.values).map(|(p, v)| p * v).sum()
    }
}

/// Piecewise-linear convex value function with one action per vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaVectorPolicy {
    pub n_states: usize,
    /// Fingerprint of the model the policy was solved for.
    pub model_fingerprint: String,
    pub gamma: f64,
    pub horizon: Option<usize>,
    /// One vector set for an unbounded horizon, otherwise one per round.
    pub stages: Vec<Vec<AlphaVector>>,
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl AlphaVectorPolicy {
    /// A policy from explicit vectors, mainly for tests.
    pub fn from_vectors(n_states: usize, vectors: Vec<AlphaVector>) -> AlphaVectorPolicy {
        AlphaVectorPolicy {
            n_states,
            model_fingerprint: String::new(),
            gamma: 0.0,
            horizon: None,
            stages: vec![vectors],
            residual: 0.0,
            converged: true,
            iterations: 0,
        }
    }

    fn stage(&self, round: usize) -> &[AlphaVector] {
        &self.stages[round.min(self.stages.len() - 1)]
    }

    /// Best vector in the mode block at `round`, preferring the free action
    /// among ties.
    pub fn best(&self, b: &Belief, mode: InteractionMode, round: usize) -> Result<&AlphaVector> {
        if b.len() != self.n_states {
            return Err(Error::DimensionMismatch {
                what: "belief".into(),
                expected: self.n_states,
                found: b.len(),
            });
        }
        let mut best: Option<(&AlphaVector, f64)> = None;
        for v in self.stage(round).iter().filter(|v| v.mode == mode) {
            let value = v.value(b.probs());
            best = match best {
                None => Some((v, value)),
                Some((cur, cv)) => {
                    let replace = if v.action.is_costly() == cur.action.is_costly() {
                        value > cv
                    } else if v.action.is_costly() {
                        strictly_better(value, cv)
                    } else {
                        !strictly_better(cv, value)
                    };
                    if replace {
                        Some((v, value))
                    } else {
                        Some((cur, cv))
                    }
                }
            };
        }
        best.map(|(v, _)| v)
            .ok_or_else(|| Error::InvalidConfig(format!("policy has no vectors for mode {mode}")))
    }

    pub fn value(&self, b: &Belief, mode: InteractionMode, round: usize) -> Result<f64> {
        Ok(self.best(b, mode, round)?.value(b.probs()))
    }

    pub fn action_at(&self, b: &Belief, mode: InteractionMode, round: usize) -> Result<RobotAction> {
        Ok(self.best(b, mode, round)?.action)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("policy serializes")
    }

    /// Parses a policy document and refuses it unless it was built for
    /// `params`.
    pub fn from_json_checked(text: &str, params: &ModelParams) -> Result<AlphaVectorPolicy> {
        let policy: AlphaVectorPolicy = serde_json::from_str(text)?;
        let found = params.fingerprint();
        if policy.model_fingerprint != found {
            return Err(Error::FingerprintMismatch {
                expected: policy.model_fingerprint,
                found,
            });
        }
        Ok(policy)
    }
}

/// Action of the policy at `b` in `mode` (first stage of a finite-horizon
/// policy).
pub fn policy_action(policy: &AlphaVectorPolicy, b: &Belief, mode: InteractionMode) -> Result<RobotAction> {
    policy.action_at(b, mode, 0)
}

/// Precomputed per-action quantities for backups.
struct Backup<'a> {
    params: &'a ModelParams,
    rewards: [Vec<f64>; 4],
    gamma: f64,
}

/// Projection of a next-stage vector through one (action, observation)
/// pair: `g(s) = sum_{s'} O(o | s, a) T(s' | s, a) alpha(s')`.
fn project(params: &ModelParams, mode: InteractionMode, action: RobotAction, obs: Observation, alpha: &[f64]) -> Vec<f64> {
    (0..params.n_states)
        .map(|s| {
            let o = params.observation_prob(s, mode, action, obs);
            if o == 0.0 {
                return 0.0;
            }
            let row = params.transition_row(s, action);
            o * row.iter().zip(alpha).map(|(t, a)| t * a).sum::<f64>()
        })
        .collect()
}

/// g vectors for one (mode, action, obs slot, next mode) combination.
type GSet = Vec<Vec<f64>>;

/// Projections of every next-stage vector, indexed by (mode, action, obs).
struct Projections {
    // [mode][action index][obs slot][mode'] -> list of g vectors
    g: Vec<Vec<Vec<Vec<GSet>>>>,
}

impl Projections {
    fn build(params: &ModelParams, next: &[AlphaVector]) -> Projections {
        let mut g = vec![vec![vec![vec![Vec::new(); 2]; 2]; 4]; 2];
        for m in InteractionMode::ALL {
            for a in m.actions() {
                for (oi, &o) in m.observations().iter().enumerate() {
                    for v in next {
                        g[m.index()][a.index()][oi][v.mode.index()].push(project(params, m, a, o, &v.values));
                    }
                }
            }
        }
        Projections { g }
    }
}

impl Backup<'_> {
    /// Point-based backup at `(b, m)`; `next_modes` is the distribution of
    /// the following round's mode.
    fn backup(
        &self,
        b: &[f64],
        m: InteractionMode,
        next_modes: &[(InteractionMode, f64)],
        proj: &Projections,
    ) -> Option<AlphaVector> {
        let n = self.params.n_states;
        let mut candidates = Vec::with_capacity(2);
        for a in m.actions() {
            let mut alpha = self.rewards[a.index()].clone();
            for oi in 0..m.observations().len() {
                for &(mn, pm) in next_modes {
                    let options = &proj.g[m.index()][a.index()][oi][mn.index()];
                    let mut best: Option<(&Vec<f64>, f64)> = None;
                    for g in options {
                        let v: f64 = b.iter().zip(g).map(|(p, x)| p * x).sum();
                        if best.is_none_or(|(_, bv)| v > bv) {
                            best = Some((g, v));
                        }
                    }
                    let (g, _) = best?;
                    for s in 0..n {
                        alpha[s] += self.gamma * pm * g[s];
                    }
                }
            }
            let value: f64 = b.iter().zip(&alpha).map(|(p, x)| p * x).sum();
            candidates.push((a, alpha, value));
        }
        let free = candidates.pop().expect("two actions");
        let costly = candidates.pop().expect("two actions");
        let (action, values) = if strictly_better(costly.2, free.2) {
            (costly.0, costly.1)
        } else {
            (free.0, free.1)
        };
        Some(AlphaVector { mode: m, action, values })
    }
}

fn belief_key(m: InteractionMode, b: &[f64]) -> (usize, Vec<i64>) {
    (m.index(), b.iter().map(|p| (p * 1e9).round() as i64).collect())
}

fn successors(params: &ModelParams, b: &Belief, m: InteractionMode) -> Vec<Belief> {
    let mut out = Vec::new();
    for a in m.actions() {
        for &o in m.observations() {
            if observation_likelihood(params, b.probs(), m, a, o) > 0.0 {
                if let Ok(next) = belief_update(params, b, m, a, o) {
                    out.push(next);
                }
            }
        }
    }
    out
}

fn dedup_vectors(vectors: Vec<AlphaVector>) -> Vec<AlphaVector> {
    let mut seen = HashSet::new();
    vectors
        .into_iter()
        .filter(|v| {
            let key = (
                v.mode.index(),
                v.action.index(),
                v.values.iter().map(|x| (x * 1e9).round() as i64).collect::<Vec<_>>(),
            );
            seen.insert(key)
        })
        .collect()
}

/// Point-based value iteration for the augmented (latent state, mode) model.
///
/// With `config.horizon = None` the mode process must be `Iid` or
/// `Alternating` and the result is a single stationary vector set. With a
/// bounded horizon any process is accepted (a `FixedSequence` bounds the
/// horizon by its length) and one vector set per round is produced; when the
/// per-stage point budget covers every reachable belief the result is exact
/// at the initial belief.
pub fn solve_pbvi(
    params: &ModelParams,
    reward: &RewardSpec,
    mode_process: &ModeProcess,
    config: &PlanConfig,
) -> Result<AlphaVectorPolicy> {
    mode_process.check()?;
    if !(0.0..1.0).contains(&config.gamma) {
        return Err(Error::InvalidConfig(format!("gamma = {} must lie in [0, 1)", config.gamma)));
    }
    if config.max_belief_points == 0 {
        return Err(Error::InvalidConfig("belief-point budget must be positive".into()));
    }
    check_dims(params, reward, &params.initial_belief)?;
    let backup = Backup {
        params,
        rewards: RobotAction::ALL.map(|a| reward.reward_vector(a)),
        gamma: config.gamma,
    };
    let horizon = match (mode_process, config.horizon) {
        (ModeProcess::FixedSequence { sequence }, None) => Some(sequence.len()),
        (ModeProcess::FixedSequence { sequence }, Some(h)) if h > sequence.len() => {
            return Err(Error::InvalidConfig(format!(
                "horizon {h} exceeds the {}-round schedule",
                sequence.len()
            )))
        }
        (_, h) => h,
    };
    match horizon {
        Some(h) => solve_finite(params, &backup, mode_process, config, h),
        None => solve_discounted(params, reward, &backup, mode_process, config),
    }
}

fn solve_finite(
    params: &ModelParams,
    backup: &Backup,
    process: &ModeProcess,
    config: &PlanConfig,
    horizon: usize,
) -> Result<AlphaVectorPolicy> {
    if horizon == 0 {
        return Err(Error::InvalidConfig("horizon must be positive".into()));
    }
    let n = params.n_states;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    // Reachable beliefs per stage, expanded from on-schedule modes only.
    let mut stage_beliefs: Vec<Vec<Belief>> = vec![vec![params.initial_belief.clone()]];
    for k in 0..horizon - 1 {
        let on_schedule = process.modes_at(k);
        let mut seen = HashSet::new();
        let mut next = Vec::new();
        for b in &stage_beliefs[k] {
            for &(m, _) in &on_schedule {
                for nb in successors(params, b, m) {
                    if seen.insert(belief_key(InteractionMode::HNeedsHelp, nb.probs())) {
                        next.push(nb);
                    }
                }
            }
        }
        if next.len() > config.max_belief_points {
            next.shuffle(&mut rng);
            next.truncate(config.max_belief_points);
        }
        stage_beliefs.push(next);
    }

    let mut stages: Vec<Vec<AlphaVector>> = vec![Vec::new(); horizon];
    let mut next_vectors: Vec<AlphaVector> = InteractionMode::ALL
        .iter()
        .map(|&m| AlphaVector {
            mode: m,
            action: m.actions()[1],
            values: vec![0.0; n],
        })
        .collect();
    for k in (0..horizon).rev() {
        let proj = Projections::build(params, &next_vectors);
        let mut vectors = Vec::new();
        for b in &stage_beliefs[k] {
            for m in InteractionMode::ALL {
                let next_modes = if k + 1 < horizon { process.next(m, k) } else { vec![(m, 0.0)] };
                if let Some(v) = backup.backup(b.probs(), m, &next_modes, &proj) {
                    vectors.push(v);
                }
            }
        }
        let vectors = dedup_vectors(vectors);
        stages[k] = vectors.clone();
        next_vectors = vectors;
    }
    Ok(AlphaVectorPolicy {
        n_states: n,
        model_fingerprint: params.fingerprint(),
        gamma: config.gamma,
        horizon: Some(horizon),
        stages,
        residual: 0.0,
        converged: true,
        iterations: horizon,
    })
}

fn collect_points(
    params: &ModelParams,
    process: &ModeProcess,
    config: &PlanConfig,
) -> Vec<(Belief, InteractionMode)> {
    let budget = config.max_belief_points;
    let mut seen = HashSet::new();
    let mut points: Vec<(Belief, InteractionMode)> = Vec::new();
    let mut push = |points: &mut Vec<(Belief, InteractionMode)>, b: Belief, m: InteractionMode| {
        if points.len() < budget && seen.insert(belief_key(m, b.probs())) {
            points.push((b, m));
            true
        } else {
            false
        }
    };
    for m in InteractionMode::ALL {
        push(&mut points, params.initial_belief.clone(), m);
    }
    // Breadth-first over reachable beliefs for half the budget.
    let mut frontier: Vec<(Belief, InteractionMode, usize)> = process
        .modes_at(0)
        .into_iter()
        .map(|(m, _)| (params.initial_belief.clone(), m, 0))
        .collect();
    let bfs_budget = budget.div_ceil(2);
    let mut head = 0;
    while head < frontier.len() && points.len() < bfs_budget {
        let (b, m, k) = frontier[head].clone();
        head += 1;
        for nb in successors(params, &b, m) {
            for (mn, _) in process.next(m, k) {
                if push(&mut points, nb.clone(), mn) {
                    frontier.push((nb.clone(), mn, k + 1));
                }
            }
        }
    }
    // Random rollouts reach deeper beliefs with the rest.
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut stalls = 0;
    while points.len() < budget && stalls < 50 * budget {
        let mut b = params.initial_belief.clone();
        let mut m = sample_mode(&process.modes_at(0), &mut rng);
        let depth = rng.random_range(1..=60);
        let mut added = false;
        for k in 0..depth {
            let succ = successors(params, &b, m);
            if succ.is_empty() {
                break;
            }
            b = succ[rng.random_range(0..succ.len())].clone();
            m = sample_mode(&process.next(m, k), &mut rng);
            added |= push(&mut points, b.clone(), m);
        }
        if !added {
            stalls += 1;
        }
    }
    points
}

fn sample_mode(dist: &[(InteractionMode, f64)], rng: &mut ChaCha8Rng) -> InteractionMode {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for &(m, p) in dist {
        acc += p;
        if u < acc {
            return m;
        }
    }
    dist.last().expect("non-empty mode distribution").0
}

fn solve_discounted(
    params: &ModelParams,
    reward: &RewardSpec,
    backup: &Backup,
    process: &ModeProcess,
    config: &PlanConfig,
) -> Result<AlphaVectorPolicy> {
    if matches!(process, ModeProcess::FixedSequence { .. }) {
        return Err(Error::InvalidConfig(
            "a fixed mode sequence needs a bounded horizon".into(),
        ));
    }
    let n = params.n_states;
    let points = collect_points(params, process, config);
    let min_reward = RobotAction::ALL
        .iter()
        .flat_map(|&a| reward.reward_vector(a))
        .fold(f64::INFINITY, f64::min);
    let floor = min_reward / (1.0 - config.gamma);
    let mut vectors: Vec<AlphaVector> = InteractionMode::ALL
        .iter()
        .map(|&m| AlphaVector {
            mode: m,
            action: m.actions()[1],
            values: vec![floor; n],
        })
        .collect();
    let value_at = |vectors: &[AlphaVector], b: &Belief, m: InteractionMode| -> f64 {
        vectors
            .iter()
            .filter(|v| v.mode == m)
            .map(|v| v.value(b.probs()))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < config.max_iterations {
        let proj = Projections::build(params, &vectors);
        let mut next = Vec::with_capacity(points.len());
        for (b, m) in &points {
            if let Some(v) = backup.backup(b.probs(), *m, &process.next(*m, 0), &proj) {
                next.push(v);
            }
        }
        let next = dedup_vectors(next);
        residual = points
            .iter()
            .map(|(b, m)| (value_at(&next, b, *m) - value_at(&vectors, b, *m)).abs())
            .fold(0.0, f64::max);
        vectors = next;
        iterations += 1;
        if residual < config.epsilon {
            break;
        }
    }
    Ok(AlphaVectorPolicy {
        n_states: n,
        model_fingerprint: params.fingerprint(),
        gamma: config.gamma,
        horizon: None,
        stages: vec![vectors],
        residual,
        converged: residual < config.epsilon,
        iterations,
    })
}
