//! HTTP session service.
//!
//! | method | path | body | reply |
//! |---|---|---|---|
//! | POST | `/sessions` | `{model, policy, reward?, mode_sequence?, policy_document?}` | `{id, belief, policy, n_states}` |
//! | POST | `/sessions/{id}/act` | `{mode, obs?}` | `{action, round, belief, awaiting_observation}` |
//! | POST | `/sessions/{id}/observe` | `{obs}` | `{belief, round}` |
//! | GET | `/sessions/{id}` | | full session trace |
//! | DELETE | `/sessions/{id}` | | 204 |
//!
//! Unknown sessions answer 404, events that are illegal for the mode 422, and
//! requests that arrive in the wrong phase 409. Requests to one session are
//! serialized by a per-session lock.

use std::collections::HashMap;
use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use prosocial_core::model::default_scores;
use prosocial_core::planner::AlphaVectorPolicy;
use prosocial_core::policy::PolicyName;
use prosocial_core::session::{ActOutcome, Session, SessionTrace};
use prosocial_core::trajectory::{event_record, Extras, ModeSequence};
use prosocial_core::{Error as CoreError, InteractionEvent, InteractionMode, ModelParams, Observation, RewardSpec};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::{parse_schedule, resolve_policy, CliError, CliResult};

/// A schedule as a list of mode values (`"H"`, `"R"`) or as a string of
/// help-opportunity letters such as `"HRHRHRHRH"`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ScheduleInput {
    Modes(Vec<InteractionMode>),
    Opportunities(String),
}

impl ScheduleInput {
    fn resolve(&self) -> CliResult<ModeSequence> {
        match self {
            ScheduleInput::Modes(m) => Ok(ModeSequence::new("modes", m.clone())?),
            ScheduleInput::Opportunities(s) => parse_schedule(s, false),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct CreateRequest {
    pub model: ModelParams,
    pub policy: PolicyName,
    /// Defaults to the exponential reward over the default scores.
    #[serde(default)]
    pub reward: Option<RewardSpec>,
    #[serde(default)]
    pub mode_sequence: Option<ScheduleInput>,
    /// Pre-solved policy for `lspomdp`; solved on creation when absent.
    #[serde(default)]
    pub policy_document: Option<AlphaVectorPolicy>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateResponse {
    pub id: String,
    pub belief: Vec<f64>,
    pub policy: String,
    pub n_states: usize,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ActRequest {
    pub mode: InteractionMode,
    #[serde(default, alias = "human_observation")]
    pub obs: Option<Observation>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ObserveRequest {
    #[serde(alias = "human_observation")]
    pub obs: Observation,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObserveResponse {
    pub belief: Vec<f64>,
    pub round: usize,
}

struct Entry {
    session: Session,
    log: Option<PathBuf>,
}

/// Shared state of the service.
#[derive(Default)]
pub struct AppState {
    sessions: RwLock<HashMap<String, Arc<Mutex<Entry>>>>,
    log_dir: Option<PathBuf>,
}

impl AppState {
    pub fn new(log_dir: Option<PathBuf>) -> AppState {
        AppState {
            sessions: RwLock::default(),
            log_dir,
        }
    }

    fn get(&self, id: &str) -> Result<Arc<Mutex<Entry>>, ApiError> {
        self.sessions
            .read()
            .expect("session table lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(id))
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn not_found(id: &str) -> ApiError {
        ApiError {
            status: StatusCode::NOT_FOUND,
            message: format!("no session {id:?}"),
        }
    }
}

impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        let status = match &e {
            CoreError::OutOfOrder(_) => StatusCode::CONFLICT,
            CoreError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError {
            status,
            message: e.to_string(),
        }
    }
}

impl From<CliError> for ApiError {
    fn from(e: CliError) -> Self {
        match e {
            CliError::Core(inner) => inner.into(),
            CliError::Io { .. } | CliError::Service(_) => ApiError {
                status: StatusCode::INTERNAL_SERVER_ERROR,
                message: e.to_string(),
            },
            other => ApiError {
                status: StatusCode::UNPROCESSABLE_ENTITY,
                message: other.to_string(),
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message, "status": self.status.as_u16() }))).into_response()
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(trace).delete(remove))
        .route("/sessions/{id}/act", post(act))
        .route("/sessions/{id}/observe", post(observe))
        .with_state(state)
}

fn build_session(req: CreateRequest) -> CliResult<Session> {
    req.model.check()?;
    let reward = match req.reward {
        Some(r) => r,
        None => RewardSpec::exponential(
            prosocial_core::model::DEFAULT_R,
            default_scores(req.model.n_states),
            prosocial_core::model::DEFAULT_COST,
            prosocial_core::model::DEFAULT_COST,
            prosocial_core::model::DEFAULT_GAMMA,
        )?,
    };
    let schedule = req.mode_sequence.as_ref().map(ScheduleInput::resolve).transpose()?;
    let policy = resolve_policy(req.policy, &req.model, &reward, schedule.as_ref(), req.policy_document)?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    Ok(Session::new(id, req.model, policy, reward, schedule.map(|s| s.modes))?)
}

async fn create(State(state): State<Arc<AppState>>, Json(req): Json<CreateRequest>) -> Result<Response, ApiError> {
    // Solving a learned policy can take a while; keep it off the reactor.
    let session = tokio::task::spawn_blocking(move || build_session(req))
        .await
        .map_err(|e| ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            message: e.to_string(),
        })??;
    let reply = CreateResponse {
        id: session.id.clone(),
        belief: session.belief().probs().to_vec(),
        policy: session.trace().policy,
        n_states: session.model().n_states,
    };
    let log = state.log_dir.as_ref().map(|d| d.join(format!("{}.jsonl", session.id)));
    state
        .sessions
        .write()
        .expect("session table lock")
        .insert(session.id.clone(), Arc::new(Mutex::new(Entry { session, log })));
    Ok((StatusCode::CREATED, Json(reply)).into_response())
}

fn append_log(path: &PathBuf, id: &str, event: &InteractionEvent, belief: &[f64]) -> Result<(), ApiError> {
    let mut extras = Extras::new();
    extras.insert("belief".into(), json!(belief));
    let line = Value::Object(event_record(id, event, &extras)).to_string();
    let io = |e: std::io::Error| ApiError {
        status: StatusCode::INTERNAL_SERVER_ERROR,
        message: format!("cannot write session log {}: {e}", path.display()),
    };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let mut file = std::fs::OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
    writeln!(file, "{line}").map_err(io)
}

fn log_completed(entry: &Entry) -> Result<(), ApiError> {
    if let (Some(path), Some(event)) = (&entry.log, entry.session.last_event()) {
        append_log(path, &entry.session.id, event, entry.session.belief().probs())?;
    }
    Ok(())
}

async fn act(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<ActRequest>,
) -> Result<Json<ActOutcome>, ApiError> {
    let handle = state.get(&id)?;
    let mut entry = handle.lock().expect("session lock");
    let outcome = entry.session.act(req.mode, req.obs)?;
    if !outcome.awaiting_observation {
        log_completed(&entry)?;
    }
    Ok(Json(outcome))
}

async fn observe(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<ObserveRequest>,
) -> Result<Json<ObserveResponse>, ApiError> {
    let handle = state.get(&id)?;
    let mut entry = handle.lock().expect("session lock");
    let belief = entry.session.observe(req.obs)?.probs().to_vec();
    log_completed(&entry)?;
    Ok(Json(ObserveResponse {
        belief,
        round: entry.session.round(),
    }))
}

async fn trace(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<SessionTrace>, ApiError> {
    let handle = state.get(&id)?;
    let entry = handle.lock().expect("session lock");
    Ok(Json(entry.session.trace()))
}

async fn remove(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    match state.sessions.write().expect("session table lock").remove(&id) {
        Some(_) => Ok(StatusCode::NO_CONTENT),
        None => Err(ApiError::not_found(&id)),
    }
}

/// Serves until interrupted.
pub fn serve_blocking(addr: SocketAddr, log_dir: Option<PathBuf>) -> CliResult<()> {
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Service(e.to_string()))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| CliError::Service(format!("cannot bind {addr}: {e}")))?;
        eprintln!("listening on http://{}", listener.local_addr().map_err(|e| CliError::Service(e.to_string()))?);
        axum::serve(listener, router(Arc::new(AppState::new(log_dir))))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| CliError::Service(e.to_string()))
    })
}
