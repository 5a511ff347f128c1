//! Python bindings.
//!
//! Models, rewards, solved policies and sessions are exposed as classes;
//! larger reports (fits, simulations, sweeps) are returned as JSON text to
//! be read with `json.loads`.

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use prosocial_core::em::{select_model, Criterion, EmConfig};
use prosocial_core::model::{default_scores, validate as validate_model, Severity};
use prosocial_core::planner::{solve_pbvi, AlphaVectorPolicy, ModeProcess, PlanConfig};
use prosocial_core::policy::{PolicyKind, PolicyName};
use prosocial_core::session::Session as CoreSession;
use prosocial_core::sim::{compare_policies, sample_trajectories, sensitivity_sweep, ScoreMap, SweepGrid};
use prosocial_core::trajectory::{builtin_sequence, load_trajectories, write_trajectories, Format, ModeSequence};
use prosocial_core::{fixtures, Belief, InteractionMode, ModelParams, Observation, RewardSpec, RobotAction};

create_exception!(prosocial, ProsocialError, PyValueError);

fn err(e: impl std::fmt::Display) -> PyErr {
    ProsocialError::new_err(e.to_string())
}

fn mode(s: &str) -> PyResult<InteractionMode> {
    InteractionMode::parse(s).ok_or_else(|| err(format!("unknown mode {s:?}")))
}

fn action(s: &str) -> PyResult<RobotAction> {
    RobotAction::parse(s).ok_or_else(|| err(format!("unknown action {s:?}")))
}

fn observation(s: &str) -> PyResult<Observation> {
    Observation::parse(s).ok_or_else(|| err(format!("unknown observation {s:?}")))
}

/// Built-in schedule name or help-opportunity letters.
fn schedule(s: &str) -> PyResult<ModeSequence> {
    match builtin_sequence(s) {
        Some(seq) => Ok(seq),
        None => ModeSequence::from_opportunities(s).map_err(err),
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report types serialize")
}

/// Latent-state model: transitions, observation rows and initial belief.
#[pyclass(module = "prosocial")]
pub struct Model {
    inner: ModelParams,
}

#[pymethods]
impl Model {
    #[new]
    fn new(transition: Vec<Vec<Vec<f64>>>, observation: Vec<Vec<Vec<f64>>>, initial_belief: Vec<f64>) -> PyResult<Model> {
        let b0 = Belief::new(initial_belief).map_err(err)?;
        Ok(Model {
            inner: ModelParams::new(transition, observation, b0).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Model> {
        Ok(Model {
            inner: ModelParams::from_json(text).map_err(err)?,
        })
    }

    /// One of `fixture_a`, `planted_two_state`, `four_state_ladder`,
    /// `delayed_payoff`.
    #[staticmethod]
    fn fixture(name: &str) -> PyResult<Model> {
        let inner = match name {
            "fixture_a" => fixtures::fixture_a(),
            "planted_two_state" => fixtures::planted_two_state(),
            "four_state_ladder" => fixtures::four_state_ladder(),
            "delayed_payoff" => fixtures::delayed_payoff(),
            other => return Err(err(format!("unknown fixture {other:?}"))),
        };
        Ok(Model { inner })
    }

    fn to_json(&self) -> String {
        self.inner.to_json_pretty()
    }

    #[getter]
    fn n_states(&self) -> usize {
        self.inner.n_states
    }

    #[getter]
    fn transition(&self) -> Vec<Vec<Vec<f64>>> {
        self.inner.transition.clone()
    }

    #[getter]
    fn observation(&self) -> Vec<Vec<Vec<f64>>> {
        self.inner.observation.clone()
    }

    #[getter]
    fn initial_belief(&self) -> Vec<f64> {
        self.inner.initial_belief.probs().to_vec()
    }

    fn fingerprint(&self) -> String {
        self.inner.fingerprint()
    }

    /// `(severity, message)` pairs; empty for a clean model.
    fn validate(&self) -> Vec<(String, String)> {
        validate_model(&self.inner)
            .into_iter()
            .map(|v| {
                let sev = match v.severity {
                    Severity::Error => "error",
                    Severity::Warning => "warning",
                };
                (sev.to_string(), v.message)
            })
            .collect()
    }

    /// Filters `belief` through one round.
    fn belief_update(&self, belief: Vec<f64>, mode_: &str, action_: &str, obs: &str) -> PyResult<Vec<f64>> {
        let b = Belief::new(belief).map_err(err)?;
        let next = prosocial_core::belief_update(&self.inner, &b, mode(mode_)?, action(action_)?, observation(obs)?)
            .map_err(err)?;
        Ok(next.into_inner())
    }

    fn __repr__(&self) -> String {
        format!("Model(n_states={}, fingerprint={}...)", self.inner.n_states, &self.inner.fingerprint()[..12])
    }
}

/// Action costs, prosocial reward and discount. With `table` the per-state
/// values are used as given; otherwise `exp(r x_s) - exp(r x_0)` over
/// `scores` (default scores for `n_states` when omitted).
#[pyclass(module = "prosocial")]
pub struct Reward {
    inner: RewardSpec,
}

#[pymethods]
impl Reward {
    #[new]
    #[pyo3(signature = (n_states=4, r=0.06, scores=None, table=None, c_help=15.0, c_signal=15.0, gamma=0.95))]
    fn new(
        n_states: usize,
        r: f64,
        scores: Option<Vec<f64>>,
        table: Option<Vec<f64>>,
        c_help: f64,
        c_signal: f64,
        gamma: f64,
    ) -> PyResult<Reward> {
        let inner = match table {
            Some(values) => RewardSpec::tabulated(values, c_help, c_signal, gamma),
            None => RewardSpec::exponential(r, scores.unwrap_or_else(|| default_scores(n_states)), c_help, c_signal, gamma),
        }
        .map_err(err)?;
        Ok(Reward { inner })
    }

    #[getter]
    fn prosocial_values(&self) -> Vec<f64> {
        self.inner.prosocial_values()
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma
    }

    fn value(&self, state: usize, action_: &str) -> PyResult<f64> {
        self.inner.reward(state, action(action_)?).map_err(err)
    }

    fn to_json(&self) -> String {
        to_json(&self.inner)
    }
}

/// Solved alpha-vector policy, tied to the model it was built for.
#[pyclass(module = "prosocial")]
pub struct Policy {
    inner: AlphaVectorPolicy,
}

#[pymethods]
impl Policy {
    /// Reads a policy document and refuses it unless it matches `model`.
    #[staticmethod]
    fn from_json(text: &str, model: PyRef<'_, Model>) -> PyResult<Policy> {
        Ok(Policy {
            inner: AlphaVectorPolicy::from_json_checked(text, &model.inner).map_err(err)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json_pretty()
    }

    #[pyo3(signature = (belief, mode_, round=0))]
    fn action(&self, belief: Vec<f64>, mode_: &str, round: usize) -> PyResult<String> {
        let b = Belief::new(belief).map_err(err)?;
        Ok(self.inner.action_at(&b, mode(mode_)?, round).map_err(err)?.as_str().to_string())
    }

    #[pyo3(signature = (belief, mode_, round=0))]
    fn value(&self, belief: Vec<f64>, mode_: &str, round: usize) -> PyResult<f64> {
        let b = Belief::new(belief).map_err(err)?;
        self.inner.value(&b, mode(mode_)?, round).map_err(err)
    }

    #[getter]
    fn n_stages(&self) -> usize {
        self.inner.stages.len()
    }

    #[getter]
    fn model_fingerprint(&self) -> String {
        self.inner.model_fingerprint.clone()
    }
}

/// Solves a policy for the rounds of `sequence` (help-opportunity letters
/// or a built-in schedule name), or for an unbounded alternating schedule
/// when `sequence` is None.
#[pyfunction]
#[pyo3(signature = (model, reward, sequence=Some("HRHRHRHRH".to_string()), points=400, seed=0))]
fn plan(
    py: Python<'_>,
    model: PyRef<'_, Model>,
    reward: PyRef<'_, Reward>,
    sequence: Option<String>,
    points: usize,
    seed: u64,
) -> PyResult<Policy> {
    let process = match sequence {
        Some(s) => ModeProcess::FixedSequence { sequence: schedule(&s)? },
        None => ModeProcess::default(),
    };
    let config = PlanConfig {
        gamma: reward.inner.gamma,
        max_belief_points: points,
        seed,
        ..PlanConfig::default()
    };
    let (m, r) = (model.inner.clone(), reward.inner.clone());
    let inner = py.detach(|| solve_pbvi(&m, &r, &process, &config)).map_err(err)?;
    Ok(Policy { inner })
}

fn policy_kind(name: &str, policy: Option<&Policy>) -> PyResult<PolicyKind> {
    let parsed: PolicyName = name.parse().map_err(err)?;
    match parsed.baseline() {
        Some(kind) => Ok(kind),
        None => match policy {
            Some(p) => Ok(PolicyKind::LsPomdp(Box::new(p.inner.clone()))),
            None => Err(err("the lspomdp policy needs a solved Policy")),
        },
    }
}

/// Live two-phase session: `act` picks the robot's action for a round and,
/// in R-mode, `observe` closes the round with the human's response.
#[pyclass(module = "prosocial")]
pub struct Session {
    inner: CoreSession,
}

#[pymethods]
impl Session {
    #[new]
    #[pyo3(signature = (model, policy, reward, policy_object=None, mode_sequence=None, id="session".to_string()))]
    fn new(
        model: PyRef<'_, Model>,
        policy: &str,
        reward: PyRef<'_, Reward>,
        policy_object: Option<PyRef<'_, Policy>>,
        mode_sequence: Option<String>,
        id: String,
    ) -> PyResult<Session> {
        let kind = policy_kind(policy, policy_object.as_deref())?;
        let modes = mode_sequence.map(|s| schedule(&s).map(|seq| seq.modes)).transpose()?;
        Ok(Session {
            inner: CoreSession::new(id, model.inner.clone(), kind, reward.inner.clone(), modes).map_err(err)?,
        })
    }

    /// Returns `(action, round, belief_or_None)`.
    #[pyo3(signature = (mode_, obs=None))]
    fn act(&mut self, mode_: &str, obs: Option<&str>) -> PyResult<(String, usize, Option<Vec<f64>>)> {
        let o = obs.map(observation).transpose()?;
        let out = self.inner.act(mode(mode_)?, o).map_err(err)?;
        Ok((out.action.as_str().to_string(), out.round, out.belief))
    }

    fn observe(&mut self, obs: &str) -> PyResult<Vec<f64>> {
        Ok(self.inner.observe(observation(obs)?).map_err(err)?.probs().to_vec())
    }

    #[getter]
    fn belief(&self) -> Vec<f64> {
        self.inner.belief().probs().to_vec()
    }

    #[getter]
    fn round(&self) -> usize {
        self.inner.round()
    }

    /// Completed rounds as `(mode, action, observation)` triples.
    fn events(&self) -> Vec<(String, String, String)> {
        self.inner
            .events()
            .map(|e| (e.mode.as_str().into(), e.action.as_str().into(), e.observation.as_str().into()))
            .collect()
    }

    /// Filters the logged events again from the model's initial belief.
    fn replay(&self) -> PyResult<Vec<f64>> {
        let events: Vec<_> = self.inner.events().copied().collect();
        Ok(prosocial_core::session::replay(self.inner.model(), &events).map_err(err)?.into_inner())
    }

    fn trace_json(&self) -> String {
        to_json(&self.inner.trace())
    }
}

/// Simulated interaction logs as JSONL, with actions drawn uniformly over
/// the legal pair each round.
#[pyfunction]
#[pyo3(signature = (model, n, sequence="HRHRHRHRH", seed=0))]
fn sample_jsonl(model: PyRef<'_, Model>, n: usize, sequence: &str, seed: u64) -> PyResult<String> {
    let modes = schedule(sequence)?.modes;
    let set = sample_trajectories(&model.inner, &[modes], n, seed).map_err(err)?;
    let bytes = write_trajectories(&set, Format::Jsonl).map_err(err)?;
    String::from_utf8(bytes).map_err(err)
}

/// Fits every state count in `states` and returns `(chosen model, report
/// JSON)`.
#[pyfunction]
#[pyo3(signature = (data, states, restarts=30, max_iters=500, tol=1e-6, seed=0, criterion="bic", format="jsonl"))]
#[allow(clippy::too_many_arguments)]
fn fit(
    py: Python<'_>,
    data: &str,
    states: Vec<usize>,
    restarts: usize,
    max_iters: usize,
    tol: f64,
    seed: u64,
    criterion: &str,
    format: &str,
) -> PyResult<(Model, String)> {
    let fmt = match format {
        "jsonl" => Format::Jsonl,
        "csv" => Format::Csv,
        other => return Err(err(format!("unknown format {other:?}"))),
    };
    let crit = match criterion {
        "bic" => Criterion::Bic,
        "loglik" => Criterion::Loglik,
        other => return Err(err(format!("unknown criterion {other:?}"))),
    };
    if states.is_empty() {
        return Err(err("no state counts given"));
    }
    let set = load_trajectories(data.as_bytes(), fmt).map_err(err)?;
    let config = EmConfig {
        n_restarts: restarts,
        max_iters,
        tol,
        seed,
        ..EmConfig::new(states[0])
    };
    let report = py.detach(|| select_model(&set, &states, &config, crit)).map_err(err)?;
    Ok((
        Model {
            inner: report.chosen().params.clone(),
        },
        to_json(&report),
    ))
}

/// Paired policy comparison; returns the report as JSON.
#[pyfunction]
#[pyo3(signature = (model, reward, policies, policy=None, truth=None, sequence="HRHRHRHRH", episodes=10000, seed=0))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    py: Python<'_>,
    model: PyRef<'_, Model>,
    reward: PyRef<'_, Reward>,
    policies: Vec<String>,
    policy: Option<PyRef<'_, Policy>>,
    truth: Option<PyRef<'_, Model>>,
    sequence: &str,
    episodes: usize,
    seed: u64,
) -> PyResult<String> {
    let kinds = policies
        .iter()
        .map(|n| policy_kind(n, policy.as_deref()))
        .collect::<PyResult<Vec<_>>>()?;
    let modes = schedule(sequence)?.modes;
    let robot = model.inner.clone();
    let truth = truth.map(|t| t.inner.clone()).unwrap_or_else(|| robot.clone());
    let r = reward.inner.clone();
    let report = py
        .detach(|| compare_policies(&truth, &robot, &kinds, &modes, &r, &ScoreMap::from_reward(&r), episodes, seed))
        .map_err(err)?;
    Ok(to_json(&report))
}

/// First decisions over the exponent × cost grid; returns the report as
/// JSON.
#[pyfunction]
#[pyo3(signature = (model, gamma=0.95, scores=None))]
fn sweep(model: PyRef<'_, Model>, gamma: f64, scores: Option<Vec<f64>>) -> PyResult<String> {
    let grid = SweepGrid::reference(scores.unwrap_or_else(|| default_scores(model.inner.n_states)));
    Ok(to_json(&sensitivity_sweep(&model.inner, &grid, gamma).map_err(err)?))
}

#[pymodule]
fn prosocial(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ProsocialError", m.py().get_type::<ProsocialError>())?;
    m.add_class::<Model>()?;
    m.add_class::<Reward>()?;
    m.add_class::<Policy>()?;
    m.add_class::<Session>()?;
    m.add_function(wrap_pyfunction!(plan, m)?)?;
    m.add_function(wrap_pyfunction!(sample_jsonl, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    Ok(())
}
