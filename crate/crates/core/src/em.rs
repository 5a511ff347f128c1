//! Baum-Welch estimation for the latent prosocial state.
//!
//! Transitions are conditioned on the robot action. The emission factor of an
//! event is `O(o | s, a)` when the robot needed help and exactly one when the
//! human did, so H-mode events inform the transition counts only through the
//! forward and backward messages. Observation rows are re-estimated from
//! R-mode events alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{default_labels, Belief, InteractionEvent, InteractionMode, ModelParams, RobotAction};
use crate::trajectory::TrajectorySet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub n_states: usize,
    pub n_restarts: usize,
    pub max_iters: usize,
    /// Stop once the log-likelihood changes by less than this.
    pub tol: f64,
    /// Symmetric Dirichlet concentration for random initialization. Values
    /// above one also add `alpha - 1` pseudo-counts in the M-step.
    pub dirichlet_alpha: f64,
    pub seed: u64,
}

impl EmConfig {
    pub fn new(n_states: usize) -> EmConfig {
        EmConfig {
            n_states,
            n_restarts: 30,
            max_iters: 500,
            tol: 1e-6,
            dirichlet_alpha: 1.0,
            seed: 0,
        }
    }

    pub fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.n_states == 0 {
            return bad("n_states must be at least 1");
        }
        if self.n_restarts == 0 {
            return bad("n_restarts must be at least 1");
        }
        if !(self.tol > 0.0) {
            return bad("tol must be positive");
        }
        if !(self.dirichlet_alpha >= 1.0) {
            return bad("dirichlet_alpha must be at least 1");
        }
        Ok(())
    }
}

/// Smoothed posteriors and expected transition counts for one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct EStepResult {
    /// `gamma[k][s]`: posterior of state `s` at event `k`.
    pub gamma: Vec<Vec<f64>>,
    /// `xi[k][s][s']`: posterior of the pair `(s_k, s_{k+1})`, for
    /// `k < K - 1`, under action `a_k`.
    pub xi: Vec<Vec<Vec<f64>>>,
    pub loglik: f64,
    /// Scaled forward messages (filtered beliefs after each event's evidence).
    pub fwd: Vec<Vec<f64>>,
    /// Scaled backward messages.
    pub bwd: Vec<Vec<f64>>,
    /// Per-event normalizers; `loglik` is the sum of their logs.
    pub scales: Vec<f64>,
}

fn emission(params: &ModelParams, e: &InteractionEvent, s: usize) -> f64 {
    match e.mode {
        InteractionMode::HNeedsHelp => 1.0,
        InteractionMode::RNeedsHelp => params.observation_prob(s, e.mode, e.action, e.observation),
    }
}

/// Scaled forward-backward pass. Fails with the index of the first event
/// whose evidence has zero probability.
fn forward_backward_inner(
    params: &ModelParams,
    events: &[InteractionEvent],
) -> std::result::Result<EStepResult, (usize, String)> {
    let n = params.n_states;
    let k_len = events.len();
    if k_len == 0 {
        return Err((0, "empty trajectory".into()));
    }
    let mut fwd = vec![vec![0.0; n]; k_len];
    let mut scales = vec![0.0; k_len];
    for k in 0..k_len {
        let e = &events[k];
        let prior: Vec<f64> = if k == 0 {
            params.initial_belief.probs().to_vec()
        } else {
            crate::model::predict(params, &fwd[k - 1], events[k - 1].action)
        };
        let mut total = 0.0;
        for s in 0..n {
            let v = prior[s] * emission(params, e, s);
            fwd[k][s] = v;
            total += v;
        }
        if !(total > 0.0) {
            return Err((k, format!("observation {} after {} has zero probability", e.observation, e.action)));
        }
        for v in &mut fwd[k] {
            *v /= total;
        }
        scales[k] = total;
    }

    let mut bwd = vec![vec![1.0; n]; k_len];
    for k in (0..k_len - 1).rev() {
        let a = events[k].action;
        let next = &events[k + 1];
        for s in 0..n {
            let row = params.transition_row(s, a);
            let mut acc = 0.0;
            for sn in 0..n {
                acc += row[sn] * emission(params, next, sn) * bwd[k + 1][sn];
            }
            bwd[k][s] = acc / scales[k + 1];
        }
    }

    let gamma: Vec<Vec<f64>> = (0..k_len)
        .map(|k| {
            let raw: Vec<f64> = (0..n).map(|s| fwd[k][s] * bwd[k][s]).collect();
            let z: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / z).collect()
        })
        .collect();

    let xi: Vec<Vec<Vec<f64>>> = (0..k_len.saturating_sub(1))
        .map(|k| {
            let a = events[k].action;
            let next = &events[k + 1];
            let mut m = vec![vec![0.0; n]; n];
            let mut z = 0.0;
            for s in 0..n {
                if fwd[k][s] == 0.0 {
                    continue;
                }
                for sn in 0..n {
                    let v = fwd[k][s] * params.t(s, a, sn) * emission(params, next, sn) * bwd[k + 1][sn]
                        / scales[k + 1];
                    m[s][sn] = v;
                    z += v;
                }
            }
            if z > 0.0 {
                for row in &mut m {
                    for v in row {
                        *v /= z;
                    }
                }
            }
            m
        })
        .collect();

    let loglik = scales.iter().map(|c| c.ln()).sum();
    Ok(EStepResult {
        gamma,
        xi,
        loglik,
        fwd,
        bwd,
        scales,
    })
}

pub fn forward_backward(params: &ModelParams, events: &[InteractionEvent]) -> Result<EStepResult> {
    forward_backward_inner(params, events).map_err(|(event, message)| Error::Fit {
        trajectory: 0,
        event,
        message,
    })
}

/// Expected counts accumulated over trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    /// `[s][action][s']`
    pub transitions: Vec<Vec<Vec<f64>>>,
    /// `[s][signal|no-signal][help|no-help]`
    pub observations: Vec<Vec<Vec<f64>>>,
    pub initial: Vec<f64>,
    pub n_trajectories: usize,
}

impl SufficientStats {
    pub fn zeros(n: usize) -> SufficientStats {
        SufficientStats {
            transitions: vec![vec![vec![0.0; n]; 4]; n],
            observations: vec![vec![vec![0.0; 2]; 2]; n],
            initial: vec![0.0; n],
            n_trajectories: 0,
        }
    }

    pub fn accumulate(&mut self, events: &[InteractionEvent], e: &EStepResult) {
        let n = self.initial.len();
        for s in 0..n {
            self.initial[s] += e.gamma[0][s];
        }
        for (k, xi) in e.xi.iter().enumerate() {
            let a = events[k].action.index();
            for s in 0..n {
                for sn in 0..n {
                    self.transitions[s][a][sn] += xi[s][sn];
                }
            }
        }
        for (k, ev) in events.iter().enumerate() {
            if ev.mode != InteractionMode::RNeedsHelp {
                continue;
            }
            let (Some(a), Some(o)) = (ev.action.observation_index(), ev.observation.index()) else {
                continue;
            };
            for s in 0..n {
                self.observations[s][a][o] += e.gamma[k][s];
            }
        }
        self.n_trajectories += 1;
    }
}

/// A parameter row that received no expected counts and kept its previous
/// value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegenerateRow {
    pub table: String,
    pub state: usize,
    pub action: RobotAction,
}

fn normalized_row(counts: &[f64], pseudo: f64, previous: &[f64]) -> (Vec<f64>, bool) {
    let total: f64 = counts.iter().sum::<f64>();
    if !(total > 1e-300) {
        return (previous.to_vec(), true);
    }
    let denom = total + pseudo * counts.len() as f64;
    (counts.iter().map(|c| (c + pseudo) / denom).collect(), false)
}

/// Re-estimates all parameters from expected counts.
pub fn m_step(stats: &SufficientStats, previous: &ModelParams, dirichlet_alpha: f64) -> (ModelParams, Vec<DegenerateRow>) {
    let n = previous.n_states;
    let pseudo = dirichlet_alpha - 1.0;
    let mut degenerate = Vec::new();
    let transition = (0..n)
        .map(|s| {
            RobotAction::ALL
                .iter()
                .map(|&a| {
                    let (row, flat) =
                        normalized_row(&stats.transitions[s][a.index()], pseudo, previous.transition_row(s, a));
                    if flat {
                        degenerate.push(DegenerateRow {
                            table: "transition".into(),
                            state: s,
                            action: a,
                        });
                    }
                    row
                })
                .collect()
        })
        .collect();
    let observation = (0..n)
        .map(|s| {
            [RobotAction::Signal, RobotAction::NoSignal]
                .iter()
                .enumerate()
                .map(|(ai, &a)| {
                    let (row, flat) = normalized_row(&stats.observations[s][ai], pseudo, &previous.observation[s][ai]);
                    if flat {
                        degenerate.push(DegenerateRow {
                            table: "observation".into(),
                            state: s,
                            action: a,
                        });
                    }
                    row
                })
                .collect()
        })
        .collect();
    let init_weights: Vec<f64> = stats.initial.iter().map(|c| c + pseudo).collect();
    let initial_belief = Belief::from_weights(init_weights).unwrap_or_else(|_| previous.initial_belief.clone());
    (
        ModelParams {
            n_states: n,
            state_labels: previous.state_labels.clone(),
            transition,
            observation,
            initial_belief,
        },
        degenerate,
    )
}

/// Parameters laid out contiguously for the inner loops.
struct FlatModel {
    n: usize,
    /// `[action][s][s']`
    t: Vec<f64>,
    /// `[signal|no-signal][help|no-help][s]`
    o: Vec<f64>,
}

impl FlatModel {
    fn new(params: &ModelParams) -> FlatModel {
        let n = params.n_states;
        let mut t = vec![0.0; 4 * n * n];
        for s in 0..n {
            for a in 0..4 {
                for sn in 0..n {
                    t[(a * n + s) * n + sn] = params.transition[s][a][sn];
                }
            }
        }
        let mut o = vec![0.0; 4 * n];
        for s in 0..n {
            for a in 0..2 {
                for h in 0..2 {
                    o[(a * 2 + h) * n + s] = params.observation[s][a][h];
                }
            }
        }
        FlatModel { n, t, o }
    }

    /// Emission vector of an event, or `None` when it is identically one.
    fn emission(&self, e: &InteractionEvent) -> Option<&[f64]> {
        if e.mode != InteractionMode::RNeedsHelp {
            return None;
        }
        let a = e.action.observation_index()?;
        let h = e.observation.index()?;
        let start = (a * 2 + h) * self.n;
        Some(&self.o[start..start + self.n])
    }
}

#[derive(Default)]
struct Workspace {
    fwd: Vec<f64>,
    bwd: Vec<f64>,
    scales: Vec<f64>,
    tmp: Vec<f64>,
}

/// Flat counterpart of [`SufficientStats`], indexed like [`FlatModel`].
struct FlatStats {
    t: Vec<f64>,
    o: Vec<f64>,
    initial: Vec<f64>,
    loglik: f64,
    n_trajectories: usize,
}

impl FlatStats {
    fn zeros(n: usize) -> FlatStats {
        FlatStats {
            t: vec![0.0; 4 * n * n],
            o: vec![0.0; 4 * n],
            initial: vec![0.0; n],
            loglik: 0.0,
            n_trajectories: 0,
        }
    }

    fn into_stats(self, n: usize) -> SufficientStats {
        let mut out = SufficientStats::zeros(n);
        for s in 0..n {
            for a in 0..4 {
                for sn in 0..n {
                    out.transitions[s][a][sn] = self.t[(a * n + s) * n + sn];
                }
            }
            for a in 0..2 {
                for h in 0..2 {
                    out.observations[s][a][h] = self.o[(a * 2 + h) * n + s];
                }
            }
        }
        out.initial = self.initial;
        out.n_trajectories = self.n_trajectories;
        out
    }
}

fn accumulate_flat(
    m: &FlatModel,
    b0: &[f64],
    events: &[InteractionEvent],
    ws: &mut Workspace,
    st: &mut FlatStats,
) -> std::result::Result<(), (usize, String)> {
    let n = m.n;
    let k_len = events.len();
    if k_len == 0 {
        return Err((0, "empty trajectory".into()));
    }
    ws.fwd.clear();
    ws.fwd.resize(k_len * n, 0.0);
    ws.bwd.clear();
    ws.bwd.resize(k_len * n, 1.0);
    ws.scales.clear();
    ws.scales.resize(k_len, 0.0);
    ws.tmp.clear();
    ws.tmp.resize(n, 0.0);

    for k in 0..k_len {
        let (done, rest) = ws.fwd.split_at_mut(k * n);
        let cur = &mut rest[..n];
        if k == 0 {
            cur.copy_from_slice(b0);
        } else {
            let prev = &done[(k - 1) * n..];
            let a = events[k - 1].action.index();
            cur.fill(0.0);
            for s in 0..n {
                let w = prev[s];
                if w == 0.0 {
                    continue;
                }
                let row = &m.t[(a * n + s) * n..(a * n + s + 1) * n];
                for sn in 0..n {
                    cur[sn] += w * row[sn];
                }
            }
        }
        if let Some(em) = m.emission(&events[k]) {
            for s in 0..n {
                cur[s] *= em[s];
            }
        }
        let total: f64 = cur.iter().sum();
        if !(total > 0.0) {
            let e = &events[k];
            return Err((k, format!("observation {} after {} has zero probability", e.observation, e.action)));
        }
        for v in cur.iter_mut() {
            *v /= total;
        }
        ws.scales[k] = total;
    }

    for k in (0..k_len - 1).rev() {
        let a = events[k].action.index();
        let em = m.emission(&events[k + 1]);
        let (head, tail) = ws.bwd.split_at_mut((k + 1) * n);
        let next = &tail[..n];
        for sn in 0..n {
            ws.tmp[sn] = next[sn] * em.map_or(1.0, |e| e[sn]);
        }
        let scale = ws.scales[k + 1];
        let cur = &mut head[k * n..];
        for s in 0..n {
            let row = &m.t[(a * n + s) * n..(a * n + s + 1) * n];
            let acc: f64 = row.iter().zip(&ws.tmp).map(|(t, w)| t * w).sum();
            cur[s] = acc / scale;
        }
    }

    for k in 0..k_len {
        let f = &ws.fwd[k * n..(k + 1) * n];
        let b = &ws.bwd[k * n..(k + 1) * n];
        let z: f64 = f.iter().zip(b).map(|(x, y)| x * y).sum();
        if k == 0 {
            for s in 0..n {
                st.initial[s] += f[s] * b[s] / z;
            }
        }
        let e = &events[k];
        if e.mode == InteractionMode::RNeedsHelp {
            if let (Some(a), Some(h)) = (e.action.observation_index(), e.observation.index()) {
                let dst = &mut st.o[(a * 2 + h) * n..(a * 2 + h + 1) * n];
                for s in 0..n {
                    dst[s] += f[s] * b[s] / z;
                }
            }
        }
        if k + 1 < k_len {
            let a = e.action.index();
            let em = m.emission(&events[k + 1]);
            let b_next = &ws.bwd[(k + 1) * n..(k + 2) * n];
            for sn in 0..n {
                ws.tmp[sn] = b_next[sn] * em.map_or(1.0, |e| e[sn]);
            }
            // With scaled messages the pair posterior sums to `z` times the
            // next normalizer, so dividing by both yields a distribution.
            let norm = z * ws.scales[k + 1];
            for s in 0..n {
                if f[s] == 0.0 {
                    continue;
                }
                let row = &m.t[(a * n + s) * n..(a * n + s + 1) * n];
                let dst = &mut st.t[(a * n + s) * n..(a * n + s + 1) * n];
                let w = f[s] / norm;
                for sn in 0..n {
                    dst[sn] += w * row[sn] * ws.tmp[sn];
                }
            }
        }
    }
    st.loglik += ws.scales.iter().map(|c| c.ln()).sum::<f64>();
    st.n_trajectories += 1;
    Ok(())
}

/// E-step over a whole data set: merged statistics and total log-likelihood.
pub fn e_step(params: &ModelParams, data: &TrajectorySet) -> Result<(SufficientStats, f64)> {
    let n = params.n_states;
    let m = FlatModel::new(params);
    let b0 = params.initial_belief.probs();
    let mut ws = Workspace::default();
    let mut st = FlatStats::zeros(n);
    for (ti, t) in data.trajectories.iter().enumerate() {
        accumulate_flat(&m, b0, &t.events, &mut ws, &mut st).map_err(|(event, message)| Error::Fit {
            trajectory: ti,
            event,
            message,
        })?;
    }
    let ll = st.loglik;
    Ok((st.into_stats(n), ll))
}

fn sample_simplex(rng: &mut ChaCha8Rng, dist: &Gamma<f64>, n: usize) -> Vec<f64> {
    loop {
        let draws: Vec<f64> = (0..n).map(|_| dist.sample(rng)).collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 && total.is_finite() {
            return draws.into_iter().map(|d| d / total).collect();
        }
    }
}

/// Random parameters: every row drawn from a symmetric Dirichlet, uniform
/// initial belief.
pub fn random_params(n_states: usize, alpha: f64, rng: &mut ChaCha8Rng) -> ModelParams {
    let dist = Gamma::new(alpha, 1.0).expect("alpha is positive");
    let transition = (0..n_states)
        .map(|_| (0..4).map(|_| sample_simplex(rng, &dist, n_states)).collect())
        .collect();
    let observation = (0..n_states)
        .map(|_| (0..2).map(|_| sample_simplex(rng, &dist, 2)).collect())
        .collect();
    ModelParams {
        n_states,
        state_labels: default_labels(n_states),
        transition,
        observation,
        initial_belief: Belief::uniform(n_states),
    }
}

/// Generator for restart `restart` under a base seed.
pub fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64 + 1);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartOutcome {
    pub loglik: f64,
    pub n_iters: usize,
    pub converged: bool,
    /// Log-likelihood at every E-step.
    pub trace: Vec<f64>,
    #[serde(skip)]
    pub params: Option<ModelParams>,
    pub degenerate: Vec<DegenerateRow>,
}

/// Runs EM from the given starting point.
pub fn run_em(data: &TrajectorySet, start: ModelParams, config: &EmConfig) -> Result<RestartOutcome> {
    let mut params = start;
    let mut trace: Vec<f64> = Vec::new();
    let mut degenerate = Vec::new();
    let mut n_iters = 0;
    let mut converged = false;
    loop {
        let (stats, ll) = e_step(&params, data)?;
        if let Some(&prev) = trace.last() {
            if (ll - prev).abs() < config.tol {
                trace.push(ll);
                converged = true;
                break;
            }
        }
        trace.push(ll);
        if n_iters >= config.max_iters {
            break;
        }
        let (next, flat) = m_step(&stats, &params, config.dirichlet_alpha);
        params = next;
        degenerate = flat;
        n_iters += 1;
    }
    Ok(RestartOutcome {
        loglik: *trace.last().expect("at least one E-step"),
        n_iters,
        converged,
        trace,
        params: Some(params),
        degenerate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub n_states: usize,
    pub params: ModelParams,
    pub loglik: f64,
    pub best_restart: usize,
    pub per_restart_logliks: Vec<f64>,
    pub n_iters: Vec<usize>,
    pub converged: Vec<bool>,
    /// Log-likelihood trace of the best restart.
    pub loglik_trace: Vec<f64>,
    /// Rows that saw no data and kept their initial value in the best run.
    pub degenerate: Vec<DegenerateRow>,
    pub n_events: usize,
    pub n_free_params: usize,
    pub bic: f64,
}

/// Free parameters of an `n`-state model: initial belief, four transition
/// matrices and two binary observation rows per state.
pub fn free_parameters(n: usize) -> usize {
    (n - 1) + 4 * n * (n - 1) + 2 * n
}

/// `-2 loglik + k ln N` with `N` the number of events.
pub fn bic(loglik: f64, n_states: usize, n_events: usize) -> f64 {
    -2.0 * loglik + free_parameters(n_states) as f64 * (n_events.max(1) as f64).ln()
}

/// Multi-restart EM. Returns the best run with states put in canonical
/// order.
pub fn em_fit(data: &TrajectorySet, config: &EmConfig) -> Result<FitReport> {
    config.check()?;
    if data.is_empty() {
        return Err(Error::InvalidConfig("no trajectories to fit".into()));
    }
    data.check()?;
    let outcomes: Vec<RestartOutcome> = (0..config.n_restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = restart_rng(config.seed, r);
            let start = random_params(config.n_states, config.dirichlet_alpha, &mut rng);
            run_em(data, start, config)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut best = 0;
    for (i, o) in outcomes.iter().enumerate() {
        if o.loglik > outcomes[best].loglik {
            best = i;
        }
    }
    let winner = &outcomes[best];
    let params = winner.params.clone().expect("run_em returns params");
    let (order, params) = order_states_with_permutation(&params);
    let degenerate = winner
        .degenerate
        .iter()
        .map(|d| DegenerateRow {
            state: order.iter().position(|&o| o == d.state).expect("permutation"),
            ..d.clone()
        })
        .collect();
    let n_events = data.n_events();
    Ok(FitReport {
        n_states: config.n_states,
        params,
        loglik: winner.loglik,
        best_restart: best,
        per_restart_logliks: outcomes.iter().map(|o| o.loglik).collect(),
        n_iters: outcomes.iter().map(|o| o.n_iters).collect(),
        converged: outcomes.iter().map(|o| o.converged).collect(),
        loglik_trace: winner.trace.clone(),
        degenerate,
        n_events,
        n_free_params: free_parameters(config.n_states),
        bic: bic(winner.loglik, config.n_states, n_events),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    /// Highest raw log-likelihood.
    Loglik,
    /// Lowest BIC.
    Bic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub criterion: Criterion,
    pub candidates: Vec<FitReport>,
    pub chosen_n_states: usize,
}

impl SelectionReport {
    pub fn chosen(&self) -> &FitReport {
        self.candidates
            .iter()
            .find(|c| c.n_states == self.chosen_n_states)
            .expect("chosen candidate is present")
    }
}

pub fn select_model(
    data: &TrajectorySet,
    candidates: &[usize],
    config: &EmConfig,
    criterion: Criterion,
) -> Result<SelectionReport> {
    if candidates.is_empty() {
        return Err(Error::InvalidConfig("no candidate state counts".into()));
    }
    let reports = candidates
        .iter()
        .map(|&n| em_fit(data, &EmConfig { n_states: n, ..config.clone() }))
        .collect::<Result<Vec<_>>>()?;
    let score = |r: &FitReport| match criterion {
        Criterion::Loglik => r.loglik,
        Criterion::Bic => -r.bic,
    };
    let mut best = 0;
    for (i, r) in reports.iter().enumerate() {
        if score(r) > score(&reports[best]) {
            best = i;
        }
    }
    Ok(SelectionReport {
        criterion,
        chosen_n_states: reports[best].n_states,
        candidates: reports,
    })
}

fn order_states_with_permutation(params: &ModelParams) -> (Vec<usize>, ModelParams) {
    let mut order: Vec<usize> = (0..params.n_states).collect();
    let scores: Vec<f64> = order.iter().map(|&s| params.help_score(s)).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let permuted = params.permuted(&order);
    (order, permuted)
}

/// Relabels states in increasing order of
/// `P(help | s, signal) + P(help | s, no-signal)`, ties broken by original
/// index.
pub fn order_states(params: &ModelParams) -> ModelParams {
    order_states_with_permutation(params).1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::fixture_a;
    use crate::model::Observation;
    use crate::trajectory::Trajectory;
    use approx::assert_abs_diff_eq;

    fn ev(k: usize, mode: InteractionMode, action: RobotAction, obs: Observation) -> InteractionEvent {
        InteractionEvent::new(k, mode, action, obs).unwrap()
    }

    #[test]
    fn single_r_event() {
        let p = fixture_a();
        let e = [ev(0, InteractionMode::RNeedsHelp, RobotAction::Signal, Observation::HumanHelped)];
        let r = forward_backward(&p, &e).unwrap();
        assert_abs_diff_eq!(r.loglik, 0.5f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(r.gamma[0][0], 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(r.gamma[0][1], 0.9, epsilon = 1e-12);
        assert!(r.xi.is_empty());
    }

    #[test]
    fn single_h_event_carries_no_evidence() {
        let p = fixture_a();
        let e = [ev(0, InteractionMode::HNeedsHelp, RobotAction::Help, Observation::None)];
        let r = forward_backward(&p, &e).unwrap();
        assert_eq!(r.loglik, 0.0);
        assert_eq!(r.gamma[0], p.initial_belief.probs());
    }

    #[test]
    fn two_event_likelihood() {
        let p = fixture_a();
        let e = [
            ev(0, InteractionMode::HNeedsHelp, RobotAction::Help, Observation::None),
            ev(1, InteractionMode::RNeedsHelp, RobotAction::Signal, Observation::HumanHelped),
        ];
        let r = forward_backward(&p, &e).unwrap();
        assert_abs_diff_eq!(r.loglik, 0.82f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn zero_probability_evidence_names_event() {
        let mut p = fixture_a();
        p.observation[0][0] = vec![1.0, 0.0];
        p.observation[1][0] = vec![1.0, 0.0];
        let e = [
            ev(0, InteractionMode::HNeedsHelp, RobotAction::Help, Observation::None),
            ev(1, InteractionMode::RNeedsHelp, RobotAction::Signal, Observation::HumanDidNotHelp),
        ];
        assert!(matches!(forward_backward(&p, &e), Err(Error::Fit { event: 1, .. })));
    }

    #[test]
    fn h_events_leave_observation_counts_untouched() {
        let p = fixture_a();
        let events = vec![
            ev(0, InteractionMode::HNeedsHelp, RobotAction::Help, Observation::None),
            ev(1, InteractionMode::HNeedsHelp, RobotAction::NoHelp, Observation::None),
            ev(2, InteractionMode::HNeedsHelp, RobotAction::Help, Observation::None),
        ];
        let e = forward_backward(&p, &events).unwrap();
        let mut stats = SufficientStats::zeros(2);
        stats.accumulate(&events, &e);
        assert!(stats.observations.iter().flatten().flatten().all(|&c| c == 0.0));
        let help_mass: f64 = stats.transitions.iter().map(|r| r[0].iter().sum::<f64>()).sum();
        assert_abs_diff_eq!(help_mass, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn batched_e_step_matches_per_trajectory_accumulation() {
        let p = crate::fixtures::four_state_ladder();
        let modes = [InteractionMode::HNeedsHelp, InteractionMode::RNeedsHelp];
        let trajectories: Vec<_> = (0..5)
            .map(|t| {
                let events = (0..7 + t)
                    .map(|k| {
                        let mode = modes[(k * 7 + t) % 3 % 2];
                        let action = mode.actions()[(k + t) % 2];
                        let obs = match mode {
                            InteractionMode::HNeedsHelp => Observation::None,
                            InteractionMode::RNeedsHelp if (k * t) % 3 == 0 => Observation::HumanHelped,
                            InteractionMode::RNeedsHelp => Observation::HumanDidNotHelp,
                        };
                        ev(k, mode, action, obs)
                    })
                    .collect();
                Trajectory::new(format!("t{t}"), events)
            })
            .collect();
        let data = TrajectorySet::new(trajectories).unwrap();
        let mut expected = SufficientStats::zeros(p.n_states);
        let mut ll = 0.0;
        for t in &data.trajectories {
            let e = forward_backward(&p, &t.events).unwrap();
            ll += e.loglik;
            expected.accumulate(&t.events, &e);
        }
        let (stats, got_ll) = e_step(&p, &data).unwrap();
        assert_abs_diff_eq!(got_ll, ll, epsilon = 1e-12);
        assert_eq!(stats.n_trajectories, expected.n_trajectories);
        let flat = |s: &SufficientStats| -> Vec<f64> {
            let mut v: Vec<f64> = s.transitions.iter().flatten().flatten().copied().collect();
            v.extend(s.observations.iter().flatten().flatten());
            v.extend(&s.initial);
            v
        };
        for (a, b) in flat(&stats).iter().zip(flat(&expected)) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn single_state_mle_is_empirical_frequency() {
        let events: Vec<_> = (0..10)
            .map(|k| {
                let obs = if k < 7 {
                    Observation::HumanHelped
                } else {
                    Observation::HumanDidNotHelp
                };
                ev(k, InteractionMode::RNeedsHelp, RobotAction::Signal, obs)
            })
            .collect();
        let data = TrajectorySet::new(vec![Trajectory::new("p", events)]).unwrap();
        let mut cfg = EmConfig::new(1);
        cfg.n_restarts = 3;
        let fit = em_fit(&data, &cfg).unwrap();
        assert_abs_diff_eq!(fit.params.observation[0][0][0], 0.7, epsilon = 1e-12);
        // Help, no-help and no-signal never occur.
        assert!(fit.degenerate.iter().any(|d| d.action == RobotAction::Help));
        assert!(crate::model::validate(&fit.params).is_empty());
    }

    #[test]
    fn order_states_sorts_and_is_idempotent() {
        let p = fixture_a();
        let swapped = p.permuted(&[1, 0]);
        assert_eq!(order_states(&swapped), p);
        assert_eq!(order_states(&p), p);
        assert_eq!(order_states(&order_states(&swapped)), order_states(&swapped));
    }

    #[test]
    fn restart_seeds_are_deterministic() {
        use rand::Rng;
        let a: u64 = restart_rng(7, 3).random();
        let b: u64 = restart_rng(7, 3).random();
        let c: u64 = restart_rng(7, 4).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn config_validation() {
        let mut c = EmConfig::new(2);
        c.tol = 0.0;
        assert!(c.check().is_err());
        let mut c = EmConfig::new(2);
        c.dirichlet_alpha = 0.5;
        assert!(c.check().is_err());
        assert!(EmConfig::new(0).check().is_err());
    }

    #[test]
    fn singleton_candidate_is_chosen() {
        let p = fixture_a();
        let events = vec![
            ev(0, InteractionMode::RNeedsHelp, RobotAction::Signal, Observation::HumanHelped),
            ev(1, InteractionMode::HNeedsHelp, RobotAction::Help, Observation::None),
        ];
        let _ = p;
        let data = TrajectorySet::new(vec![Trajectory::new("p", events)]).unwrap();
        let mut cfg = EmConfig::new(3);
        cfg.n_restarts = 2;
        let sel = select_model(&data, &[3], &cfg, Criterion::Bic).unwrap();
        assert_eq!(sel.chosen_n_states, 3);
        assert!(select_model(&data, &[], &cfg, Criterion::Bic).is_err());
    }
}
