//! Live-practice HTTP service: a human counselor talks to the simulated
//! client one turn at a time.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use clientsim_core::corpus::EmpiricalActionTable;
use clientsim_core::engine::{ClientEngine, EngineError, EngineSummary};
use clientsim_core::gateway::ChatBackend;
use clientsim_core::prompts::OPENER_COUNSELOR;
use clientsim_core::transcript::{check_turns, ClientKind};
use clientsim_core::{
    validate_profile, ClientProfile, ClientTrace, EndReason, SessionTranscript, SimulationConfig,
    StateOfChange, Turn,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::Mutex;
use tower_http::cors::CorsLayer;

use crate::backend::BackendFactory;
use crate::io::{append_jsonl, read_jsonl};

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    violations: Vec<String>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
            violations: Vec::new(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.message });
        if !self.violations.is_empty() {
            body["violations"] = json!(self.violations);
        }
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// A disclosed profile item with its text, for the debrief.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisclosedItem {
    pub item: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Debrief {
    pub final_state: StateOfChange,
    pub turns: usize,
    pub beliefs_addressed: usize,
    pub beliefs_total: usize,
    pub motivation_matched: bool,
    pub plan_agreed: bool,
    pub disclosed: Vec<DisclosedItem>,
}

impl Debrief {
    fn new(summary: &EngineSummary, profile: &ClientProfile, turns: usize) -> Self {
        Self {
            final_state: summary.final_state,
            turns,
            beliefs_addressed: summary.beliefs_addressed,
            beliefs_total: summary.beliefs_total,
            motivation_matched: summary.motivation_matched,
            plan_agreed: summary.plan_matched.is_some(),
            disclosed: summary
                .disclosed
                .iter()
                .map(|id| DisclosedItem {
                    item: id.to_string(),
                    text: profile.item(*id).unwrap_or_default().to_string(),
                })
                .collect(),
        }
    }
}

/// What the store keeps for each finished session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredSession {
    pub transcript: SessionTranscript,
    pub summary: Debrief,
    pub reveal_trace: bool,
    pub created_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct IndexEntry {
    session_id: String,
    profile_id: String,
    end_reason: EndReason,
    turns: usize,
    line: usize,
}

/// Append-only JSONL store of finished sessions plus a line index.
#[derive(Debug)]
pub struct SessionStore {
    data: PathBuf,
    index: PathBuf,
    lines: std::sync::Mutex<usize>,
}

impl SessionStore {
    pub fn open(dir: &Path) -> anyhow::Result<(Self, Vec<StoredSession>)> {
        let data = dir.join("live_sessions.jsonl");
        let index = dir.join("live_sessions.index.jsonl");
        let existing: Vec<StoredSession> = if data.exists() {
            read_jsonl(&data)?
        } else {
            Vec::new()
        };
        let store = Self {
            data,
            index,
            lines: std::sync::Mutex::new(existing.len()),
        };
        Ok((store, existing))
    }

    pub fn append(&self, s: &StoredSession) -> anyhow::Result<()> {
        let mut lines = self.lines.lock().expect("store lock");
        append_jsonl(&self.data, s)?;
        append_jsonl(
            &self.index,
            &IndexEntry {
                session_id: s.transcript.id.clone(),
                profile_id: s.transcript.profile_id.clone(),
                end_reason: s.transcript.end_reason,
                turns: s.transcript.turns.len(),
                line: *lines,
            },
        )?;
        *lines += 1;
        Ok(())
    }
}

pub struct LiveSession {
    pub id: String,
    pub profile: ClientProfile,
    pub engine: ClientEngine,
    backend: Box<dyn ChatBackend + Send>,
    pub created_at: u64,
    pub reveal_trace: bool,
    pub ended: Option<StoredSession>,
}

impl LiveSession {
    fn transcript(&self, reason: EndReason) -> SessionTranscript {
        SessionTranscript {
            id: self.id.clone(),
            profile_id: self.profile.id.clone(),
            client: ClientKind::Framework,
            session_index: 0,
            config_snapshot: self.engine.config().clone(),
            turns: self.engine.history().to_vec(),
            end_reason: reason,
        }
    }

    fn finish(&mut self, reason: EndReason, store: Option<&SessionStore>) -> &StoredSession {
        if self.ended.is_none() {
            let transcript = self.transcript(reason);
            for v in transcript.check_invariants() {
                log::warn!("session {} violates an invariant: {v}", self.id);
            }
            let stored = StoredSession {
                summary: Debrief::new(
                    &self.engine.summary(),
                    &self.profile,
                    transcript.turns.len(),
                ),
                transcript,
                reveal_trace: self.reveal_trace,
                created_at: self.created_at,
            };
            if let Some(store) = store {
                if let Err(e) = store.append(&stored) {
                    log::error!("persisting session {}: {e:#}", self.id);
                }
            }
            self.ended = Some(stored);
        }
        self.ended.as_ref().expect("just set")
    }

    /// True once another exchange would break the turn cap.
    fn at_turn_cap(&self) -> bool {
        self.engine.history().len() + 2 > self.engine.config().max_turns
    }
}

enum Entry {
    Live(Arc<Mutex<LiveSession>>),
    Stored(Arc<StoredSession>),
}

impl Clone for Entry {
    fn clone(&self) -> Self {
        match self {
            Entry::Live(s) => Entry::Live(s.clone()),
            Entry::Stored(s) => Entry::Stored(s.clone()),
        }
    }
}

pub struct AppState {
    profiles: BTreeMap<String, ClientProfile>,
    table: Arc<EmpiricalActionTable>,
    factory: BackendFactory,
    base_config: SimulationConfig,
    reports_dir: Option<PathBuf>,
    store: Option<SessionStore>,
    sessions: RwLock<HashMap<String, Entry>>,
    next_id: AtomicU64,
    epoch: u64,
}

#[derive(Debug, Clone)]
pub struct ServiceOptions {
    pub profiles: Vec<ClientProfile>,
    pub table: EmpiricalActionTable,
    pub factory: BackendFactory,
    pub base_config: SimulationConfig,
    /// Directory of `{batch_id}.json` evaluation reports.
    pub reports_dir: Option<PathBuf>,
    /// Where finished sessions are persisted; `None` keeps them in memory.
    pub store_dir: Option<PathBuf>,
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl AppState {
    pub fn new(opts: ServiceOptions) -> anyhow::Result<Self> {
        let mut sessions = HashMap::new();
        let store = match &opts.store_dir {
            Some(dir) => {
                let (store, existing) = SessionStore::open(dir)?;
                for s in existing {
                    sessions.insert(s.transcript.id.clone(), Entry::Stored(Arc::new(s)));
                }
                Some(store)
            }
            None => None,
        };
        Ok(Self {
            profiles: opts
                .profiles
                .into_iter()
                .map(|p| (p.id.clone(), p))
                .collect(),
            table: Arc::new(opts.table),
            factory: opts.factory,
            base_config: opts.base_config,
            reports_dir: opts.reports_dir,
            store,
            sessions: RwLock::new(sessions),
            next_id: AtomicU64::new(1),
            epoch: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis() as u64)
                .unwrap_or(0),
        })
    }

    fn entry(&self, id: &str) -> ApiResult<Entry> {
        self.sessions
            .read()
            .expect("session map")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown session {id}")))
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/turns", post(post_turn))
        .route("/sessions/{id}/end", post(end_session))
        .route("/profiles", get(list_profiles))
        .route("/reports/{batch_id}", get(get_report))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    #[serde(default)]
    profile_id: Option<String>,
    #[serde(default)]
    profile: Option<ClientProfile>,
    #[serde(default)]
    config: Option<serde_json::Map<String, Value>>,
    #[serde(default)]
    reveal_trace: bool,
}

fn bad_request(message: impl Into<String>) -> ApiError {
    ApiError::new(StatusCode::BAD_REQUEST, message)
}

fn parse_body<T: serde::de::DeserializeOwned>(body: Value) -> ApiResult<T> {
    serde_json::from_value(body).map_err(|e| bad_request(format!("malformed request: {e}")))
}

fn merged_config(
    base: &SimulationConfig,
    overrides: Option<serde_json::Map<String, Value>>,
) -> ApiResult<SimulationConfig> {
    let Some(overrides) = overrides else {
        return Ok(base.clone());
    };
    let mut v = serde_json::to_value(base).expect("config serializes");
    for (k, x) in overrides {
        if v.get(&k).is_none() {
            return Err(bad_request(format!("unknown config field `{k}`")));
        }
        v[k] = x;
    }
    let config: SimulationConfig =
        serde_json::from_value(v).map_err(|e| bad_request(format!("bad config: {e}")))?;
    let problems = config.validate();
    if !problems.is_empty() {
        let mut e = bad_request("invalid config");
        e.violations = problems;
        return Err(e);
    }
    Ok(config)
}

fn turn_json(t: &Turn, reveal: bool) -> Value {
    let mut v = json!({ "index": t.index, "speaker": t.speaker, "text": t.text });
    if reveal {
        if let Some(tr) = &t.trace {
            v["trace"] = json!(tr);
        }
    }
    v
}

fn trace_json(trace: &ClientTrace, reveal: bool) -> Option<Value> {
    reveal.then(|| json!(trace))
}

async fn create_session(
    State(app): State<Arc<AppState>>,
    Json(body): Json<Value>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let req: CreateRequest = parse_body(body)?;
    let profile =
        match (req.profile, req.profile_id) {
            (Some(p), _) => p,
            (None, Some(id)) => app.profiles.get(&id).cloned().ok_or_else(|| {
                ApiError::new(StatusCode::NOT_FOUND, format!("unknown profile {id}"))
            })?,
            (None, None) => return Err(bad_request("either profile_id or profile is required")),
        };
    let violations = validate_profile(&profile);
    if !violations.is_empty() {
        let mut e = bad_request("invalid profile");
        e.violations = violations;
        return Err(e);
    }
    let n = app.next_id.fetch_add(1, Ordering::SeqCst);
    let id = format!("live-{}-{n}", app.epoch);
    let mut config = merged_config(&app.base_config, req.config)?;
    config.rng_seed = clientsim_core::seed::session_seed(config.rng_seed, &id, 0);
    let mut engine = ClientEngine::new(profile.clone(), config, app.table.clone())
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    let opening = engine.open_session();
    let session = LiveSession {
        id: id.clone(),
        profile,
        engine,
        backend: app.factory.create(),
        created_at: unix_now(),
        reveal_trace: req.reveal_trace,
        ended: None,
    };
    app.sessions
        .write()
        .expect("session map")
        .insert(id.clone(), Entry::Live(Arc::new(Mutex::new(session))));
    let mut body = json!({
        "session_id": id,
        "counselor_opener": OPENER_COUNSELOR,
        "client_text": opening.text,
    });
    if let Some(t) = trace_json(&opening.trace, req.reveal_trace) {
        body["trace"] = t;
    }
    Ok((StatusCode::CREATED, Json(body)))
}

#[derive(Debug, Deserialize)]
struct TurnRequest {
    text: String,
}

fn gone(id: &str) -> ApiError {
    ApiError::new(StatusCode::GONE, format!("session {id} is over"))
}

async fn post_turn(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Json(body): Json<Value>,
) -> ApiResult<Json<Value>> {
    let req: TurnRequest = parse_body(body)?;
    let text = req.text.trim().to_string();
    if text.is_empty() {
        return Err(bad_request("text must be nonempty"));
    }
    let session = match app.entry(&id)? {
        Entry::Live(s) => s,
        Entry::Stored(_) => return Err(gone(&id)),
    };
    let mut guard = session.try_lock_owned().map_err(|_| {
        ApiError::new(
            StatusCode::CONFLICT,
            "a turn is already in flight for this session",
        )
    })?;
    if guard.ended.is_some() {
        return Err(gone(&id));
    }
    if guard.at_turn_cap() {
        guard.finish(EndReason::MaxTurns, app.store.as_ref());
        return Err(gone(&id));
    }
    let app2 = app.clone();
    tokio::task::spawn_blocking(move || {
        let s = &mut *guard;
        let step = {
            let backend = s.backend.as_ref();
            s.engine.client_step(&text, backend, backend)
        };
        let turn = match step {
            Ok(t) => t,
            Err(EngineError::Gateway(e)) => {
                return Err(ApiError::new(
                    StatusCode::SERVICE_UNAVAILABLE,
                    e.to_string(),
                ))
            }
            Err(EngineError::EmptyUtterance) => return Err(bad_request("text must be nonempty")),
            Err(EngineError::SessionTerminated) => return Err(gone(&s.id)),
            Err(e) => {
                return Err(ApiError::new(
                    StatusCode::INTERNAL_SERVER_ERROR,
                    e.to_string(),
                ))
            }
        };
        let end = if s.engine.is_terminated() {
            Some(EndReason::ClientTerminated)
        } else if s.at_turn_cap() {
            Some(EndReason::MaxTurns)
        } else {
            None
        };
        if let Some(reason) = end {
            s.finish(reason, app2.store.as_ref());
        }
        let mut body = json!({
            "turn_index": s.engine.history().len() - 1,
            "client_text": turn.text,
            "session_over": end.is_some(),
        });
        if let Some(reason) = end {
            body["end_reason"] = json!(reason);
        }
        if let Some(t) = trace_json(&turn.trace, s.reveal_trace) {
            body["trace"] = t;
            body["checks"] = json!(turn.checks);
        }
        Ok(Json(body))
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

fn stored_json(s: &StoredSession) -> Value {
    json!({ "transcript": s.transcript, "summary": s.summary })
}

async fn end_session(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Json<Value>> {
    match app.entry(&id)? {
        Entry::Stored(s) => Ok(Json(stored_json(&s))),
        Entry::Live(session) => {
            let mut s = session.lock().await;
            let stored = s.finish(EndReason::ManualStop, app.store.as_ref());
            Ok(Json(stored_json(stored)))
        }
    }
}

async fn get_session(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Json<Value>> {
    let view = |transcript_turns: &[Turn], reveal: bool, created_at: u64, profile_id: &str| {
        json!({
            "session_id": id,
            "profile_id": profile_id,
            "created_at": created_at,
            "reveal_trace": reveal,
            "turns": transcript_turns.iter().map(|t| turn_json(t, reveal)).collect::<Vec<_>>(),
        })
    };
    match app.entry(&id)? {
        Entry::Stored(s) => {
            let t = &s.transcript;
            let mut v = view(&t.turns, s.reveal_trace, s.created_at, &t.profile_id);
            v["status"] = json!("ended");
            v["end_reason"] = json!(t.end_reason);
            v["summary"] = json!(s.summary);
            Ok(Json(v))
        }
        Entry::Live(session) => {
            let s = session.lock().await;
            let mut v = view(
                s.engine.history(),
                s.reveal_trace,
                s.created_at,
                &s.profile.id,
            );
            match &s.ended {
                Some(stored) => {
                    v["status"] = json!("ended");
                    v["end_reason"] = json!(stored.transcript.end_reason);
                    v["summary"] = json!(stored.summary);
                }
                None => {
                    v["status"] = json!("open");
                    if s.reveal_trace {
                        v["state"] = json!(s.engine.current_state());
                    }
                }
            }
            debug_assert!(check_turns(s.engine.history(), s.engine.config()).is_empty());
            Ok(Json(v))
        }
    }
}

async fn list_profiles(State(app): State<Arc<AppState>>) -> Json<Vec<ClientProfile>> {
    Json(app.profiles.values().cloned().collect())
}

fn valid_batch_id(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c))
}

async fn get_report(
    State(app): State<Arc<AppState>>,
    UrlPath(batch_id): UrlPath<String>,
) -> ApiResult<Json<Value>> {
    let missing = || ApiError::new(StatusCode::NOT_FOUND, format!("unknown batch {batch_id}"));
    let dir = app.reports_dir.as_ref().ok_or_else(missing)?;
    if !valid_batch_id(&batch_id) {
        return Err(missing());
    }
    let path = dir.join(format!("{batch_id}.json"));
    let text = tokio::fs::read_to_string(&path)
        .await
        .map_err(|_| missing())?;
    let v: Value = serde_json::from_str(&text).map_err(|e| {
        ApiError::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            format!("corrupt report: {e}"),
        )
    })?;
    Ok(Json(v))
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(state: Arc<AppState>, addr: std::net::SocketAddr) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_ids_are_plain_names() {
        assert!(valid_batch_id("run-42_a.v1"));
        assert!(!valid_batch_id("../secret"));
        assert!(!valid_batch_id("a/b"));
        assert!(!valid_batch_id(""));
    }

    #[test]
    fn config_overrides_are_checked() {
        let base = SimulationConfig::default();
        let mut m = serde_json::Map::new();
        m.insert("max_turns".into(), json!(20));
        assert_eq!(merged_config(&base, Some(m)).unwrap().max_turns, 20);
        let mut m = serde_json::Map::new();
        m.insert("nope".into(), json!(1));
        assert_eq!(
            merged_config(&base, Some(m)).unwrap_err().status,
            StatusCode::BAD_REQUEST
        );
    }
}
