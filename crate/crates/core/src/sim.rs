//! Episode simulation against a generative human, paired policy comparison
//! and the reward/cost sensitivity sweep.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    belief_update, observation_likelihood, Belief, InteractionEvent, InteractionMode, ModelParams, Observation, ProsocialReward,
    RewardSpec, RobotAction,
};
use crate::planner::{exact_value_with_terminal, TerminalValue};
use crate::policy::{DecisionContext, PolicyKind};
use crate::trajectory::{Trajectory, TrajectorySet};

/// Team score earned per round as a function of the true latent state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMap(pub Vec<f64>);

impl ScoreMap {
    /// Per-round share of a five-round score total: `x_s / 5`. Tabulated
    /// rewards fall back to their per-state values.
    pub fn from_reward(reward: &RewardSpec) -> ScoreMap {
        match &reward.prosocial {
            ProsocialReward::Exponential { scores, .. } => ScoreMap(scores.iter().map(|x| x / 5.0).collect()),
            ProsocialReward::Table { prosocial_values } => ScoreMap(prosocial_values.clone()),
        }
    }

    pub fn score(&self, state: usize) -> f64 {
        self.0[state]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub mode: InteractionMode,
    pub action: RobotAction,
    /// Latent state during the round, before the transition.
    pub true_state: usize,
    pub observation: Observation,
    /// Robot belief after the update for this round.
    pub belief: Vec<f64>,
    pub reward: f64,
    pub team_score: f64,
    pub cumulative_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub initial_belief: Vec<f64>,
    pub rounds: Vec<RoundRecord>,
    pub total_reward: f64,
    pub discounted_return: f64,
}

impl EpisodeRecord {
    pub fn final_belief(&self) -> &[f64] {
        self.rounds.last().map_or(&self.initial_belief, |r| &r.belief)
    }

    pub fn cumulative_score(&self) -> f64 {
        self.rounds.last().map_or(0.0, |r| r.cumulative_score)
    }

    pub fn help_count(&self) -> usize {
        self.rounds
            .iter()
            .filter(|r| r.observation == Observation::HumanHelped)
            .count()
    }
}

/// Uniform draws for one episode, fixed by the seed so that paired policies
/// see the same randomness round by round.
struct EpisodeNoise {
    init: f64,
    obs: Vec<f64>,
    trans: Vec<f64>,
}

impl EpisodeNoise {
    fn new(seed: u64, rounds: usize) -> EpisodeNoise {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let init = rng.random();
        let obs = (0..rounds).map(|_| rng.random()).collect();
        let trans = (0..rounds).map(|_| rng.random()).collect();
        EpisodeNoise { init, obs, trans }
    }
}

fn sample_index(probs: impl IntoIterator<Item = f64>, u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.into_iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Seed of episode `i` under a base seed.
pub fn episode_seed(seed: u64, i: usize) -> u64 {
    // splitmix64 step
    let mut z = seed.wrapping_add((i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[allow(clippy::too_many_arguments)]
pub fn run_episode(
    ground_truth: &ModelParams,
    robot_model: &ModelParams,
    policy: &PolicyKind,
    modes: &[InteractionMode],
    reward: &RewardSpec,
    score_map: &ScoreMap,
    seed: u64,
) -> Result<EpisodeRecord> {
    if ground_truth.n_states != robot_model.n_states {
        return Err(Error::DimensionMismatch {
            what: "robot model".into(),
            expected: ground_truth.n_states,
            found: robot_model.n_states,
        });
    }
    if score_map.0.len() != ground_truth.n_states {
        return Err(Error::DimensionMismatch {
            what: "score map".into(),
            expected: ground_truth.n_states,
            found: score_map.0.len(),
        });
    }
    let noise = EpisodeNoise::new(seed, modes.len());
    let mut state = sample_index(ground_truth.initial_belief.probs().iter().copied(), noise.init);
    let mut belief = robot_model.initial_belief.clone();
    let mut last_response = None;
    let mut rounds = Vec::with_capacity(modes.len());
    let mut cumulative = 0.0;
    let mut total_reward = 0.0;
    let mut discounted = 0.0;
    let mut discount = 1.0;
    for (k, &mode) in modes.iter().enumerate() {
        let action = policy.act(&DecisionContext {
            belief: &belief,
            mode,
            last_response,
            round: k,
            params: robot_model,
            reward,
        })?;
        let observation = match mode {
            InteractionMode::HNeedsHelp => Observation::None,
            InteractionMode::RNeedsHelp => {
                let p_help = ground_truth.observation_prob(state, mode, action, Observation::HumanHelped);
                if noise.obs[k] < p_help {
                    Observation::HumanHelped
                } else {
                    Observation::HumanDidNotHelp
                }
            }
        };
        belief = belief_update(robot_model, &belief, mode, action, observation)?;
        if mode == InteractionMode::RNeedsHelp {
            last_response = Some(observation);
        }
        let r = reward.reward(state, action)?;
        total_reward += r;
        discounted += discount * r;
        discount *= reward.gamma;
        let team_score = score_map.score(state);
        cumulative += team_score;
        rounds.push(RoundRecord {
            round: k,
            mode,
            action,
            true_state: state,
            observation,
            belief: belief.probs().to_vec(),
            reward: r,
            team_score,
            cumulative_score: cumulative,
        });
        state = sample_index(ground_truth.transition_row(state, action).iter().copied(), noise.trans[k]);
    }
    Ok(EpisodeRecord {
        initial_belief: robot_model.initial_belief.probs().to_vec(),
        rounds,
        total_reward,
        discounted_return: discounted,
    })
}

/// Synthetic logs: `n` trajectories from `params`, cycling through the given
/// mode schedules, with each round's action drawn uniformly from the two
/// legal ones.
pub fn sample_trajectories(
    params: &ModelParams,
    schedules: &[Vec<InteractionMode>],
    n: usize,
    seed: u64,
) -> Result<TrajectorySet> {
    if schedules.is_empty() || schedules.iter().any(|s| s.is_empty()) {
        return Err(Error::InvalidConfig("need at least one non-empty mode schedule".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let modes = &schedules[i % schedules.len()];
        let mut state = sample_index(params.initial_belief.probs().iter().copied(), rng.random());
        let mut events = Vec::with_capacity(modes.len());
        for (k, &mode) in modes.iter().enumerate() {
            let [costly, free] = mode.actions();
            let action = if rng.random_bool(0.5) { costly } else { free };
            let observation = match mode {
                InteractionMode::HNeedsHelp => Observation::None,
                InteractionMode::RNeedsHelp => {
                    let p = params.observation_prob(state, mode, action, Observation::HumanHelped);
                    if rng.random::<f64>() < p {
                        Observation::HumanHelped
                    } else {
                        Observation::HumanDidNotHelp
                    }
                }
            };
            events.push(InteractionEvent::new(k, mode, action, observation)?);
            state = sample_index(params.transition_row(state, action).iter().copied(), rng.random());
        }
        out.push(Trajectory::new(format!("p{i:04}"), events));
    }
    TrajectorySet::new(out)
}

/// Mean with a normal-approximation 95% half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub ci95: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Stat {
        let n = xs.len();
        if n == 0 {
            return Stat { mean: f64::NAN, ci95: f64::NAN, n };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let ci95 = if n > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            1.96 * (var / n as f64).sqrt()
        } else {
            0.0
        };
        Stat { mean, ci95, n }
    }

    pub fn lower(&self) -> f64 {
        self.mean - self.ci95
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.ci95
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round: usize,
    pub mode: InteractionMode,
    pub team_score: Stat,
    pub cumulative_score: Stat,
    /// Cumulative score divided by the never-help/never-signal baseline's,
    /// when that baseline is part of the comparison.
    pub relative_cumulative_score: Option<f64>,
    /// Robot's belief-weighted prosocial level after the round.
    pub belief_level: Stat,
    pub true_level: Stat,
    /// Share of episodes where the human helped; R-mode rounds only.
    pub help_rate: Option<Stat>,
    pub costly_action_rate: f64,
    pub reward: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyReport {
    pub policy: String,
    pub per_round: Vec<RoundSummary>,
    pub total_reward: Stat,
    pub discounted_return: Stat,
    pub cumulative_score: Stat,
    /// Help rate pooled over all R-mode rounds.
    pub help_rate: Option<Stat>,
    #[serde(skip)]
    pub episodes: Vec<EpisodeRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub n_episodes: usize,
    pub seed: u64,
    pub modes: Vec<InteractionMode>,
    pub policies: Vec<PolicyReport>,
}

/// Which per-episode quantity to compare between policies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    TotalReward,
    DiscountedReturn,
    CumulativeScore,
    HelpCount,
}

impl Metric {
    fn of(self, e: &EpisodeRecord) -> f64 {
        match self {
            Metric::TotalReward => e.total_reward,
            Metric::DiscountedReturn => e.discounted_return,
            Metric::CumulativeScore => e.cumulative_score(),
            Metric::HelpCount => e.help_count() as f64,
        }
    }
}

impl ComparisonReport {
    pub fn policy(&self, name: &str) -> Option<&PolicyReport> {
        self.policies.iter().find(|p| p.policy == name)
    }

    /// Paired difference `a - b` over common-random-number episodes.
    pub fn paired_difference(&self, a: &str, b: &str, metric: Metric) -> Option<Stat> {
        let pa = self.policy(a)?;
        let pb = self.policy(b)?;
        let diffs: Vec<f64> = pa
            .episodes
            .iter()
            .zip(&pb.episodes)
            .map(|(x, y)| metric.of(x) - metric.of(y))
            .collect();
        Some(Stat::of(&diffs))
    }

    /// Per-round table with one row per (policy, round).
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "policy,round,mode,team_score,team_score_ci,cumulative_score,cumulative_score_ci,relative_cumulative_score,belief_level,belief_level_ci,help_rate,help_rate_ci,costly_action_rate,reward\n",
        );
        for p in &self.policies {
            for r in &p.per_round {
                let opt = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:.6}"));
                out.push_str(&format!(
                    "{},{},{},{:.6},{:.6},{:.6},{:.6},{},{:.6},{:.6},{},{},{:.6},{:.6}\n",
                    p.policy,
                    r.round,
                    r.mode,
                    r.team_score.mean,
                    r.team_score.ci95,
                    r.cumulative_score.mean,
                    r.cumulative_score.ci95,
                    opt(r.relative_cumulative_score),
                    r.belief_level.mean,
                    r.belief_level.ci95,
                    opt(r.help_rate.map(|h| h.mean)),
                    opt(r.help_rate.map(|h| h.ci95)),
                    r.costly_action_rate,
                    r.reward.mean,
                ));
            }
        }
        out
    }
}

fn summarize(name: String, modes: &[InteractionMode], episodes: Vec<EpisodeRecord>) -> PolicyReport {
    let per_round = modes
        .iter()
        .enumerate()
        .map(|(k, &mode)| {
            let col = |f: &dyn Fn(&RoundRecord) -> f64| -> Stat {
                Stat::of(&episodes.iter().map(|e| f(&e.rounds[k])).collect::<Vec<_>>())
            };
            let help_rate = (mode == InteractionMode::RNeedsHelp)
                .then(|| col(&|r| (r.observation == Observation::HumanHelped) as u8 as f64));
            RoundSummary {
                round: k,
                mode,
                team_score: col(&|r| r.team_score),
                cumulative_score: col(&|r| r.cumulative_score),
                relative_cumulative_score: None,
                belief_level: col(&|r| r.belief.iter().enumerate().map(|(i, p)| i as f64 * p).sum()),
                true_level: col(&|r| r.true_state as f64),
                help_rate,
                costly_action_rate: col(&|r| r.action.is_costly() as u8 as f64).mean,
                reward: col(&|r| r.reward),
            }
        })
        .collect();
    let whole = |m: Metric| Stat::of(&episodes.iter().map(|e| m.of(e)).collect::<Vec<_>>());
    let r_rounds = modes.iter().filter(|m| **m == InteractionMode::RNeedsHelp).count();
    let help_rate = (r_rounds > 0).then(|| {
        Stat::of(
            &episodes
                .iter()
                .map(|e| e.help_count() as f64 / r_rounds as f64)
                .collect::<Vec<_>>(),
        )
    });
    PolicyReport {
        policy: name,
        per_round,
        total_reward: whole(Metric::TotalReward),
        discounted_return: whole(Metric::DiscountedReturn),
        cumulative_score: whole(Metric::CumulativeScore),
        help_rate,
        episodes,
    }
}

/// Simulates every policy on the same `n_episodes` seeds.
#[allow(clippy::too_many_arguments)]
pub fn compare_policies(
    ground_truth: &ModelParams,
    robot_model: &ModelParams,
    policies: &[PolicyKind],
    modes: &[InteractionMode],
    reward: &RewardSpec,
    score_map: &ScoreMap,
    n_episodes: usize,
    seed: u64,
) -> Result<ComparisonReport> {
    if n_episodes == 0 {
        return Err(Error::InvalidConfig("n_episodes must be at least 1".into()));
    }
    let mut reports = Vec::with_capacity(policies.len());
    for policy in policies {
        let episodes = (0..n_episodes)
            .into_par_iter()
            .map(|i| run_episode(ground_truth, robot_model, policy, modes, reward, score_map, episode_seed(seed, i)))
            .collect::<Result<Vec<_>>>()?;
        reports.push(summarize(policy.name().to_string(), modes, episodes));
    }
    if let Some(base) = reports.iter().position(|r| r.policy == "never") {
        let baseline: Vec<f64> = reports[base].per_round.iter().map(|r| r.cumulative_score.mean).collect();
        for report in &mut reports {
            for (r, b) in report.per_round.iter_mut().zip(&baseline) {
                r.relative_cumulative_score = (*b != 0.0).then(|| r.cumulative_score.mean / b);
            }
        }
    }
    Ok(ComparisonReport {
        n_episodes,
        seed,
        modes: modes.to_vec(),
        policies: reports,
    })
}

/// Expected discounted return of a policy over a fixed schedule, computed by
/// enumerating every observation branch. The robot's model is taken to be
/// the true one, so the tracked belief is the exact posterior.
pub fn evaluate_policy_exact(
    params: &ModelParams,
    reward: &RewardSpec,
    policy: &PolicyKind,
    modes: &[InteractionMode],
    gamma: f64,
) -> Result<f64> {
    #[allow(clippy::too_many_arguments)]
    fn go(
        params: &ModelParams,
        reward: &RewardSpec,
        policy: &PolicyKind,
        modes: &[InteractionMode],
        gamma: f64,
        b: &Belief,
        k: usize,
        last: Option<Observation>,
    ) -> Result<f64> {
        if k == modes.len() {
            return Ok(0.0);
        }
        let mode = modes[k];
        let action = policy.act(&DecisionContext {
            belief: b,
            mode,
            last_response: last,
            round: k,
            params,
            reward,
        })?;
        let mut v = b.dot(&reward.reward_vector(action));
        for &o in mode.observations() {
            let p = observation_likelihood(params, b.probs(), mode, action, o);
            if p <= 0.0 {
                continue;
            }
            let next = belief_update(params, b, mode, action, o)?;
            let next_last = if mode == InteractionMode::RNeedsHelp { Some(o) } else { last };
            v += gamma * p * go(params, reward, policy, modes, gamma, &next, k + 1, next_last)?;
        }
        Ok(v)
    }
    go(params, reward, policy, modes, gamma, &params.initial_belief, 0, None)
}

/// Reward exponents and joint action costs to sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub r_values: Vec<f64>,
    /// Each value is applied to both the help and the signal cost.
    pub cost_values: Vec<f64>,
    pub scenario: Vec<InteractionMode>,
    pub scores: Vec<f64>,
    /// Defaults to the model's (learned) initial belief.
    pub initial_belief: Option<Belief>,
    pub terminal: TerminalValue,
}

pub const SWEEP_R_VALUES: [f64; 5] = [0.001, 0.04, 0.06, 0.08, 0.09];
pub const SWEEP_COSTS: [f64; 4] = [30.0, 15.0, 5.0, 0.0];

impl SweepGrid {
    /// Five exponents × four costs over the two-round H → R scenario.
    pub fn reference(scores: Vec<f64>) -> SweepGrid {
        SweepGrid {
            r_values: SWEEP_R_VALUES.to_vec(),
            cost_values: SWEEP_COSTS.to_vec(),
            scenario: vec![InteractionMode::HNeedsHelp, InteractionMode::RNeedsHelp],
            scores,
            initial_belief: None,
            terminal: TerminalValue::ProsocialLookahead,
        }
    }
}

/// Second-round decision after one first-round branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepBranch {
    pub first_action: RobotAction,
    pub observation: Observation,
    pub next_action: Option<RobotAction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub r: f64,
    pub c_help: f64,
    pub c_signal: f64,
    pub value: f64,
    pub first_action: Option<RobotAction>,
    pub branches: Vec<SweepBranch>,
}

impl SweepCell {
    pub fn next_action_after(&self, first: RobotAction) -> Option<RobotAction> {
        self.branches.iter().find(|b| b.first_action == first).and_then(|b| b.next_action)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub gamma: f64,
    pub scenario: Vec<InteractionMode>,
    pub initial_belief: Vec<f64>,
    pub cells: Vec<SweepCell>,
}

impl SweepReport {
    pub fn cell(&self, r: f64, cost: f64) -> Option<&SweepCell> {
        self.cells.iter().find(|c| c.r == r && c.c_help == cost)
    }

    /// Plain-text table: one row per (r, cost), first action and the
    /// follow-up after each first-round branch.
    pub fn render_table(&self) -> String {
        let fmt = |a: Option<RobotAction>| a.map_or("-".to_string(), |a| a.to_string());
        let mut out = format!("{:>7} {:>6} {:>9} {:>22} {:>22}\n", "r", "cost", "k=0", "k=1 | costly k=0", "k=1 | free k=0");
        for c in &self.cells {
            let mut branch = [String::from("-"), String::from("-")];
            for b in &c.branches {
                let slot = if b.first_action.is_costly() { 0 } else { 1 };
                branch[slot] = fmt(b.next_action);
            }
            out.push_str(&format!(
                "{:>7} {:>6} {:>9} {:>22} {:>22}\n",
                c.r,
                c.c_help,
                fmt(c.first_action),
                branch[0],
                branch[1]
            ));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,c_help,c_signal,value,first_action,branch_first_action,branch_observation,next_action\n");
        for c in &self.cells {
            let first = c.first_action.map_or("", |a| a.as_str());
            for b in &c.branches {
                out.push_str(&format!(
                    "{},{},{},{:.6},{},{},{},{}\n",
                    c.r,
                    c.c_help,
                    c.c_signal,
                    c.value,
                    first,
                    b.first_action,
                    b.observation,
                    b.next_action.map_or("", |a| a.as_str())
                ));
            }
        }
        out
    }
}

fn sweep_cell(
    params: &ModelParams,
    grid: &SweepGrid,
    b0: &Belief,
    r: f64,
    cost: f64,
    gamma: f64,
) -> Result<SweepCell> {
    let reward = RewardSpec::exponential(r, grid.scores.clone(), cost, cost, gamma)?;
    let root = exact_value_with_terminal(params, &reward, b0, &grid.scenario, gamma, grid.terminal)?;
    let mut branches = Vec::new();
    if let Some(&mode) = grid.scenario.first() {
        for a in mode.actions() {
            for &o in mode.observations() {
                if observation_likelihood(params, b0.probs(), mode, a, o) <= 0.0 {
                    continue;
                }
                let b1 = belief_update(params, b0, mode, a, o)?;
                let rest = exact_value_with_terminal(params, &reward, &b1, &grid.scenario[1..], gamma, grid.terminal)?;
                branches.push(SweepBranch {
                    first_action: a,
                    observation: o,
                    next_action: rest.first_action,
                });
            }
        }
    }
    Ok(SweepCell {
        r,
        c_help: cost,
        c_signal: cost,
        value: root.value,
        first_action: root.first_action,
        branches,
    })
}

/// Solves the scenario exactly for every (r, cost) cell.
pub fn sensitivity_sweep(params: &ModelParams, grid: &SweepGrid, gamma: f64) -> Result<SweepReport> {
    if grid.r_values.is_empty() || grid.cost_values.is_empty() {
        return Err(Error::InvalidConfig("sweep grids must be non-empty".into()));
    }
    let b0 = grid.initial_belief.clone().unwrap_or_else(|| params.initial_belief.clone());
    let coords: Vec<(f64, f64)> = grid
        .r_values
        .iter()
        .flat_map(|&r| grid.cost_values.iter().map(move |&c| (r, c)))
        .collect();
    let cells = coords
        .par_iter()
        .map(|&(r, c)| sweep_cell(params, grid, &b0, r, c, gamma))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport {
        gamma,
        scenario: grid.scenario.clone(),
        initial_belief: b0.into_inner(),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::fixture_a;
    use InteractionMode::{HNeedsHelp as H, RNeedsHelp as R};

    #[test]
    fn noiseless_chain() {
        let eye: Vec<Vec<Vec<f64>>> = (0..2)
            .map(|s| (0..4).map(|_| (0..2).map(|j| if j == s { 1.0 } else { 0.0 }).collect()).collect())
            .collect();
        let obs = vec![
            vec![vec![0.0, 1.0], vec![0.0, 1.0]],
            vec![vec![1.0, 0.0], vec![1.0, 0.0]],
        ];
        let p = ModelParams::new(eye, obs, Belief::point(2, 1)).unwrap();
        let reward = RewardSpec::tabulated(vec![0.0, 1.0], 1.0, 1.0, 0.9).unwrap();
        for seed in 0..20 {
            let e = run_episode(&p, &p, &PolicyKind::AlwaysHelpSignal, &[R], &reward, &ScoreMap(vec![0.0, 1.0]), seed)
                .unwrap();
            assert_eq!(e.rounds[0].observation, Observation::HumanHelped);
            assert_eq!(e.final_belief(), &[0.0, 1.0]);
        }
    }

    #[test]
    fn episode_is_deterministic_and_observations_match_modes() {
        let p = fixture_a();
        let reward = RewardSpec::tabulated(vec![0.0, 10.0], 15.0, 15.0, 0.95).unwrap();
        let modes = [H, R, H, R, H, R];
        let a = run_episode(&p, &p, &PolicyKind::MyopicGreedy, &modes, &reward, &ScoreMap(vec![1.0, 2.0]), 9).unwrap();
        let b = run_episode(&p, &p, &PolicyKind::MyopicGreedy, &modes, &reward, &ScoreMap(vec![1.0, 2.0]), 9).unwrap();
        assert_eq!(a, b);
        let observed = a.rounds.iter().filter(|r| r.observation != Observation::None).count();
        assert_eq!(observed, 3);
    }

    #[test]
    fn single_episode_report_is_the_trace() {
        let p = fixture_a();
        let reward = RewardSpec::tabulated(vec![0.0, 10.0], 15.0, 15.0, 0.95).unwrap();
        let modes = [H, R, H];
        let scores = ScoreMap(vec![9.0, 13.4]);
        let rep = compare_policies(&p, &p, &[PolicyKind::NeverHelpSignal], &modes, &reward, &scores, 1, 5).unwrap();
        let ep = run_episode(&p, &p, &PolicyKind::NeverHelpSignal, &modes, &reward, &scores, episode_seed(5, 0)).unwrap();
        let pr = &rep.policies[0];
        for (s, r) in pr.per_round.iter().zip(&ep.rounds) {
            assert_eq!(s.team_score.mean, r.team_score);
            assert_eq!(s.cumulative_score.mean, r.cumulative_score);
            assert_eq!(s.reward.mean, r.reward);
        }
        assert_eq!(pr.per_round[1].help_rate.unwrap().mean, (ep.rounds[1].observation == Observation::HumanHelped) as u8 as f64);
        assert!(pr.per_round[0].help_rate.is_none());
        assert!(compare_policies(&p, &p, &[PolicyKind::NeverHelpSignal], &modes, &reward, &scores, 0, 5).is_err());
    }

    #[test]
    fn score_map_defaults_to_fifths() {
        let s = ScoreMap::from_reward(&RewardSpec::reference());
        assert_eq!(s.0, vec![9.0, 9.6, 11.2, 13.4]);
    }

    #[test]
    fn stat_basics() {
        let s = Stat::of(&[1.0, 2.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert!((s.ci95 - 1.96 * (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(Stat::of(&[4.0]).ci95, 0.0);
    }

    #[test]
    fn sweep_shape() {
        let p = crate::fixtures::four_state_ladder();
        let grid = SweepGrid::reference(crate::model::DEFAULT_SCORES.to_vec());
        let rep = sensitivity_sweep(&p, &grid, 0.95).unwrap();
        assert_eq!(rep.cells.len(), 20);
        assert!(rep.cells.iter().all(|c| c.branches.len() == 2));
        assert!(rep.render_table().lines().count() == 21);
        let empty = SweepGrid { r_values: vec![], ..grid };
        assert!(sensitivity_sweep(&p, &empty, 0.95).is_err());
    }
}
