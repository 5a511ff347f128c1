//! Independent reference implementations used as test oracles. They read the
//! raw parameter arrays directly and share no code with the library's
//! filtering, smoothing or planning routines.
#![allow(dead_code, clippy::needless_range_loop)]

use prosocial_core::{Belief, InteractionEvent, InteractionMode, ModelParams, Observation, RobotAction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const H: InteractionMode = InteractionMode::HNeedsHelp;
pub const R: InteractionMode = InteractionMode::RNeedsHelp;

fn a_idx(a: RobotAction) -> usize {
    match a {
        RobotAction::Help => 0,
        RobotAction::NoHelp => 1,
        RobotAction::Signal => 2,
        RobotAction::NoSignal => 3,
    }
}

/// Emission probability read straight from the observation array.
pub fn emit(p: &ModelParams, s: usize, mode: InteractionMode, a: RobotAction, o: Observation) -> f64 {
    match mode {
        InteractionMode::HNeedsHelp => {
            if o == Observation::None {
                1.0
            } else {
                0.0
            }
        }
        InteractionMode::RNeedsHelp => {
            let ai = if a == RobotAction::Signal { 0 } else { 1 };
            match o {
                Observation::HumanHelped => p.observation[s][ai][0],
                Observation::HumanDidNotHelp => p.observation[s][ai][1],
                Observation::None => 0.0,
            }
        }
    }
}

pub fn trans(p: &ModelParams, s: usize, a: RobotAction, sn: usize) -> f64 {
    p.transition[s][a_idx(a)][sn]
}

/// Likelihood and per-event state posteriors by enumerating every latent
/// path.
pub fn brute_force_posteriors(p: &ModelParams, events: &[InteractionEvent]) -> (f64, Vec<Vec<f64>>) {
    let n = p.n_states;
    let k = events.len();
    let mut total = 0.0;
    let mut marg = vec![vec![0.0; n]; k];
    let mut path = vec![0usize; k];
    let count = n.pow(k as u32);
    for code in 0..count {
        let mut c = code;
        for slot in path.iter_mut() {
            *slot = c % n;
            c /= n;
        }
        let mut w = p.initial_belief.probs()[path[0]];
        for (i, e) in events.iter().enumerate() {
            w *= emit(p, path[i], e.mode, e.action, e.observation);
            if i + 1 < k {
                w *= trans(p, path[i], e.action, path[i + 1]);
            }
        }
        total += w;
        for i in 0..k {
            marg[i][path[i]] += w;
        }
    }
    for row in &mut marg {
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    (total, marg)
}

pub fn reward_table(p_values: &[f64], c_help: f64, c_signal: f64, s: usize, a: RobotAction) -> f64 {
    let cost = match a {
        RobotAction::Help => c_help,
        RobotAction::Signal => c_signal,
        _ => 0.0,
    };
    p_values[s] - cost
}

/// Prosocial values `exp(r x_s) - exp(r x_0)`.
pub fn exp_values(r: f64, scores: &[f64]) -> Vec<f64> {
    scores.iter().map(|x| (r * x).exp() - (r * scores[0]).exp()).collect()
}

pub fn costly_wins(q_costly: f64, q_free: f64) -> bool {
    q_costly > q_free + 1e-9 * q_free.abs().max(1.0)
}

fn legal(mode: InteractionMode) -> [RobotAction; 2] {
    match mode {
        InteractionMode::HNeedsHelp => [RobotAction::Help, RobotAction::NoHelp],
        InteractionMode::RNeedsHelp => [RobotAction::Signal, RobotAction::NoSignal],
    }
}

fn obs_of(mode: InteractionMode) -> Vec<Observation> {
    match mode {
        InteractionMode::HNeedsHelp => vec![Observation::None],
        InteractionMode::RNeedsHelp => vec![Observation::HumanHelped, Observation::HumanDidNotHelp],
    }
}

/// Expectimax over unnormalized forward messages `alpha(s) = P(s, history)`.
/// The value at a message is linear in it, so no normalization is ever
/// needed and the root value equals the value at `b0`.
pub struct BruteForce<'a> {
    pub params: &'a ModelParams,
    pub values: Vec<f64>,
    pub c_help: f64,
    pub c_signal: f64,
    pub gamma: f64,
    /// Adds the undiscounted expected prosocial value of the state after the
    /// last round, discounted like one more round.
    pub lookahead: bool,
}

impl BruteForce<'_> {
    pub fn solve(&self, b0: &[f64], modes: &[InteractionMode]) -> (f64, Option<RobotAction>) {
        self.value(b0, modes, 0)
    }

    fn value(&self, alpha: &[f64], modes: &[InteractionMode], k: usize) -> (f64, Option<RobotAction>) {
        let n = self.params.n_states;
        if k == modes.len() {
            if self.lookahead {
                return ((0..n).map(|s| alpha[s] * self.values[s]).sum(), None);
            }
            return (0.0, None);
        }
        let mode = modes[k];
        let [costly, free] = legal(mode);
        let q = |a: RobotAction| -> f64 {
            let mut v: f64 = (0..n)
                .map(|s| alpha[s] * reward_table(&self.values, self.c_help, self.c_signal, s, a))
                .sum();
            for o in obs_of(mode) {
                let mut next = vec![0.0; n];
                let mut mass = 0.0;
                for s in 0..n {
                    let w = alpha[s] * emit(self.params, s, mode, a, o);
                    for sn in 0..n {
                        next[sn] += w * trans(self.params, s, a, sn);
                    }
                    mass += w;
                }
                if mass <= 0.0 {
                    continue;
                }
                v += self.gamma * self.value(&next, modes, k + 1).0;
            }
            v
        };
        let (qc, qf) = (q(costly), q(free));
        // Compare on the normalized scale so the tie tolerance matches a
        // belief-space solver.
        let z: f64 = alpha.iter().sum();
        if costly_wins(qc / z, qf / z) {
            (qc, Some(costly))
        } else {
            (qf, Some(free))
        }
    }
}

/// Two-step H then R oracle written out by hand, with the prosocial
/// lookahead after the second round. Returns the k=0 action and the k=1
/// action after each k=0 action.
pub fn two_step_sweep_oracle(
    p: &ModelParams,
    values: &[f64],
    cost: f64,
    gamma: f64,
    b0: &[f64],
) -> (RobotAction, [(RobotAction, RobotAction); 2]) {
    let n = p.n_states;
    let after = |b: &[f64], a: RobotAction| -> Vec<f64> {
        (0..n).map(|sn| (0..n).map(|s| b[s] * trans(p, s, a, sn)).sum()).collect()
    };
    let dot = |b: &[f64], v: &[f64]| -> f64 { b.iter().zip(v).map(|(x, y)| x * y).sum() };
    let r = |a: RobotAction| -> Vec<f64> { (0..n).map(|s| reward_table(values, cost, cost, s, a)).collect() };
    // Observation branches of the R round sum out of a linear continuation.
    let q1 = |b1: &[f64], a: RobotAction| dot(b1, &r(a)) + gamma * dot(&after(b1, a), values);
    let step1 = |b1: &[f64]| -> (RobotAction, f64) {
        let (qs, qn) = (q1(b1, RobotAction::Signal), q1(b1, RobotAction::NoSignal));
        if costly_wins(qs, qn) {
            (RobotAction::Signal, qs)
        } else {
            (RobotAction::NoSignal, qn)
        }
    };
    let mut follow = [(RobotAction::Help, RobotAction::NoSignal); 2];
    let mut q0 = [0.0; 2];
    for (i, a0) in [RobotAction::Help, RobotAction::NoHelp].into_iter().enumerate() {
        let b1 = after(b0, a0);
        let (a1, v1) = step1(&b1);
        follow[i] = (a0, a1);
        q0[i] = dot(b0, &r(a0)) + gamma * v1;
    }
    let first = if costly_wins(q0[0], q0[1]) { RobotAction::Help } else { RobotAction::NoHelp };
    (first, follow)
}

fn random_row(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| -(rng.random::<f64>().max(1e-12)).ln()).collect();
    let z: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / z).collect()
}

/// Random model with strictly positive entries.
pub fn random_model(n: usize, rng: &mut ChaCha8Rng) -> ModelParams {
    let transition = (0..n).map(|_| (0..4).map(|_| random_row(rng, n)).collect()).collect();
    let observation = (0..n)
        .map(|_| {
            (0..2)
                .map(|_| {
                    let h = rng.random_range(0.02..0.98);
                    vec![h, 1.0 - h]
                })
                .collect()
        })
        .collect();
    let b0 = Belief::new(random_row(rng, n)).unwrap();
    ModelParams::new(transition, observation, b0).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random legal event sequence; every observation has positive
/// probability under a model with positive emissions.
pub fn random_events(rng: &mut ChaCha8Rng, len: usize) -> Vec<InteractionEvent> {
    (0..len)
        .map(|k| {
            let mode = if rng.random_bool(0.5) { H } else { R };
            let [c, f] = legal(mode);
            let a = if rng.random_bool(0.5) { c } else { f };
            let o = match mode {
                InteractionMode::HNeedsHelp => Observation::None,
                InteractionMode::RNeedsHelp => {
                    if rng.random_bool(0.5) {
                        Observation::HumanHelped
                    } else {
                        Observation::HumanDidNotHelp
                    }
                }
            };
            InteractionEvent::new(k, mode, a, o).unwrap()
        })
        .collect()
}

pub fn close_rel(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

/// Total-variation-free per-row L1 distance after aligning states.
pub fn max_row_l1(a: &ModelParams, b: &ModelParams) -> f64 {
    let n = a.n_states;
    let mut worst: f64 = 0.0;
    for s in 0..n {
        for act in 0..4 {
            let d: f64 = (0..n).map(|j| (a.transition[s][act][j] - b.transition[s][act][j]).abs()).sum();
            worst = worst.max(d);
        }
        for act in 0..2 {
            let d: f64 = (0..2).map(|j| (a.observation[s][act][j] - b.observation[s][act][j]).abs()).sum();
            worst = worst.max(d);
        }
    }
    worst
}

/// Smallest `max_row_l1` over all state permutations of `b`.
pub fn aligned_row_l1(a: &ModelParams, b: &ModelParams) -> f64 {
    permutations(a.n_states)
        .iter()
        .map(|perm| max_row_l1(a, &b.permuted(perm)))
        .fold(f64::INFINITY, f64::min)
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..n {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

/// Random mode schedules in which each round independently has the robot
/// needing help with probability `p_r`.
pub fn random_schedules(rng: &mut ChaCha8Rng, count: usize, len: usize, p_r: f64) -> Vec<Vec<InteractionMode>> {
    (0..count)
        .map(|_| (0..len).map(|_| if rng.random_bool(p_r) { R } else { H }).collect())
        .collect()
}
