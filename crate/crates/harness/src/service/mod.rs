//! HTTP JSON API consumed by the chat client.
//!
//! Each user message runs window -> assemble -> complete, and both turns are
//! committed only after the backend answers. Requests for one session queue
//! on that session's lock; different sessions proceed concurrently.

mod store;

use std::num::NonZeroUsize;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use counsel_core::metrics::{linguistic_metrics, self_disclosure, LexiconSet, LinguisticMetrics, SelfDisclosureStats};
use counsel_core::prompt::{assemble_prompt, GenerationConfig, PromptInputs, Scaffold, VariantId};
use counsel_core::session::{export_transcript, TIME_BUDGET_SECS};
use counsel_core::{Condition, Role, Session, SessionState, SurveyRecord, Topic, Turn};
use counsel_llm::CompletionBackend;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::HarnessError;
pub use store::{SessionStore, INDEX_FILE};

/// Technology-acceptance items offered after a session, scored 1..=5.
pub const SURVEY_ITEMS: [(&str, &str); 4] = [
    ("supportive", "The agent was supportive of my dietary change."),
    ("easy_to_use", "The agent was easy to use."),
    ("easy_to_understand", "The agent's responses were easy to understand."),
    ("pleasant", "The agent was pleasant to interact with."),
];

/// Which prompt variant serves a condition.
pub fn variant_for(condition: Condition) -> VariantId {
    match condition {
        Condition::Baseline => VariantId::BASELINE,
        Condition::Counsel => VariantId::FULL,
    }
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub window: NonZeroUsize,
    pub scaffold: Scaffold,
    pub generation: GenerationConfig,
    pub exemplar_seed: u64,
    /// Exemplars per subprocess for the counsel variant; all when `None`.
    pub k_per_subprocess: Option<usize>,
    pub data_dir: PathBuf,
    pub lexicons: LexiconSet,
}

struct Inner {
    store: SessionStore,
    backend: Arc<dyn CompletionBackend>,
    baseline: PromptInputs,
    counsel: PromptInputs,
    window: NonZeroUsize,
    generation: GenerationConfig,
    lexicons: LexiconSet,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    /// Validates the scaffold for both served variants and opens the store.
    pub fn new(config: ServiceConfig, backend: Arc<dyn CompletionBackend>) -> Result<Self, HarnessError> {
        config.generation.validate()?;
        let baseline = config
            .scaffold
            .inputs_for(VariantId::BASELINE, config.k_per_subprocess, config.exemplar_seed)?;
        let counsel = config
            .scaffold
            .inputs_for(VariantId::FULL, config.k_per_subprocess, config.exemplar_seed)?;
        Ok(AppState(Arc::new(Inner {
            store: SessionStore::open(&config.data_dir)?,
            backend,
            baseline,
            counsel,
            window: config.window,
            generation: config.generation,
            lexicons: config.lexicons,
        })))
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/survey/items", get(survey_items))
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/messages", post(post_message))
        .route("/sessions/{id}/end", post(end_session))
        .route("/sessions/{id}/survey", post(post_survey))
        .route("/sessions/{id}/metrics", get(session_metrics))
        .route("/sessions/{id}/transcript", get(session_transcript))
        .with_state(state)
}

/// Error body `{code, message, retriable}` with a matching status.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    retriable: bool,
}

impl ApiError {
    fn not_found(id: &str) -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            code: "not_found",
            message: format!("no session {id:?}"),
            retriable: false,
        }
    }

    fn validation(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            code: "validation",
            message: message.into(),
            retriable: false,
        }
    }

    fn lifecycle(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::CONFLICT,
            code: "lifecycle",
            message: message.into(),
            retriable: false,
        }
    }
}

impl From<HarnessError> for ApiError {
    fn from(e: HarnessError) -> Self {
        let code = e.code();
        let (status, retriable) = match &e {
            HarnessError::Backend(b) => (StatusCode::BAD_GATEWAY, b.retriable()),
            _ => match code {
                "validation" | "parse" => (StatusCode::BAD_REQUEST, false),
                "lifecycle" => (StatusCode::CONFLICT, false),
                _ => (StatusCode::INTERNAL_SERVER_ERROR, false),
            },
        };
        if status.is_server_error() {
            tracing::error!(code, error = %e, "request failed");
        }
        ApiError {
            status,
            code,
            message: e.to_string(),
            retriable,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({"code": self.code, "message": self.message, "retriable": self.retriable});
        (self.status, Json(body)).into_response()
    }
}

fn api<E: Into<HarnessError>>(e: E) -> ApiError {
    ApiError::from(e.into())
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::validation(format!("invalid request body: {e}")))
}

#[derive(Serialize)]
struct SessionView<'a> {
    #[serde(flatten)]
    session: &'a Session,
    variant: VariantId,
    time_budget_secs: u64,
}

fn view(session: &Session) -> serde_json::Value {
    serde_json::to_value(SessionView {
        session,
        variant: variant_for(session.condition()),
        time_budget_secs: TIME_BUDGET_SECS,
    })
    .expect("session serializes")
}

#[derive(Serialize)]
struct SessionSummary {
    session_id: String,
    condition: Condition,
    topic: Topic,
    state: SessionState,
    turn_count: usize,
    started_ms: i64,
    ended_ms: Option<i64>,
}

async fn healthz() -> Json<serde_json::Value> {
    Json(json!({"status": "ok"}))
}

async fn survey_items() -> Json<serde_json::Value> {
    let items: Vec<_> = SURVEY_ITEMS
        .iter()
        .map(|(id, prompt)| json!({"item_id": id, "prompt": prompt, "min": 1, "max": 5}))
        .collect();
    Json(json!({
        "intention": {"min": 0, "max": 10, "prompt": "How likely are you to make an immediate change to your selected dietary concern?"},
        "acceptance": items,
    }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    condition: Condition,
    topic: Topic,
}

async fn create_session(State(app): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: CreateRequest = parse_body(&body)?;
    let session = Session::create(req.condition, req.topic);
    let body = view(&session);
    app.0.store.insert(session).map_err(ApiError::from)?;
    tracing::info!(session_id = %body["session_id"], condition = %req.condition, "session created");
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn list_sessions(State(app): State<AppState>) -> Json<Vec<SessionSummary>> {
    let mut out = Vec::new();
    for handle in app.0.store.handles() {
        let s = handle.lock().await;
        out.push(SessionSummary {
            session_id: s.id().to_string(),
            condition: s.condition(),
            topic: s.topic(),
            state: s.state(),
            turn_count: s.turns().len(),
            started_ms: s.started_ms(),
            ended_ms: s.ended_ms(),
        });
    }
    out.sort_by(|a, b| (a.started_ms, &a.session_id).cmp(&(b.started_ms, &b.session_id)));
    Json(out)
}

fn handle(app: &AppState, id: &str) -> Result<store::SessionHandle, ApiError> {
    app.0.store.get(id).ok_or_else(|| ApiError::not_found(id))
}

async fn get_session(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<serde_json::Value>, ApiError> {
    let h = handle(&app, &id)?;
    let s = h.lock().await;
    Ok(Json(view(&s)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MessageRequest {
    text: String,
}

#[derive(Serialize)]
struct MessageResponse {
    session_id: String,
    user_turn: Turn,
    agent_turn: Turn,
    latency_ms: u64,
    attempt_count: u32,
}

async fn post_message(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<MessageResponse>, ApiError> {
    let req: MessageRequest = parse_body(&body)?;
    let h = handle(&app, &id)?;
    let mut session = h.lock().await;
    if !session.is_open() {
        return Err(ApiError::lifecycle(format!("session {id} is closed")));
    }
    let mut draft = session.clone();
    draft.append_turn(Role::User, &req.text).map_err(api)?;
    let variant = variant_for(session.condition());
    let inputs = match session.condition() {
        Condition::Baseline => &app.0.baseline,
        Condition::Counsel => &app.0.counsel,
    };
    let bundle = assemble_prompt(variant, inputs, draft.context_window(app.0.window), &app.0.generation).map_err(api)?;
    let result = app.0.backend.complete(&bundle).await.map_err(api)?;
    let user_turn = session.append_turn(Role::User, &req.text).map_err(api)?.clone();
    let agent_turn = session.append_turn(Role::Agent, &result.text).map_err(api)?.clone();
    app.0
        .store
        .append_turns(&session, &[user_turn.clone(), agent_turn.clone()])
        .map_err(ApiError::from)?;
    tracing::debug!(session_id = %id, turns = session.turns().len(), latency_ms = result.latency_ms, "exchange committed");
    Ok(Json(MessageResponse {
        session_id: id,
        user_turn,
        agent_turn,
        latency_ms: result.latency_ms,
        attempt_count: result.attempt_count,
    }))
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct EndRequest {
    #[serde(default)]
    closure_text: Option<String>,
}

async fn end_session(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<serde_json::Value>, ApiError> {
    let req: EndRequest = if body.iter().all(u8::is_ascii_whitespace) {
        EndRequest::default()
    } else {
        parse_body(&body)?
    };
    let h = handle(&app, &id)?;
    let mut session = h.lock().await;
    session.end(req.closure_text.as_deref()).map_err(api)?;
    app.0.store.rewrite(&session).map_err(ApiError::from)?;
    tracing::info!(session_id = %id, turns = session.turns().len(), "session closed");
    Ok(Json(view(&session)))
}

async fn post_survey(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<serde_json::Value>, ApiError> {
    let survey: SurveyRecord = parse_body(&body)?;
    if let Some(item) = survey
        .acceptance
        .iter()
        .find(|a| !SURVEY_ITEMS.iter().any(|(known, _)| *known == a.item_id))
    {
        return Err(ApiError::validation(format!("unknown survey item {:?}", item.item_id)));
    }
    let h = handle(&app, &id)?;
    let mut session = h.lock().await;
    if session.is_open() {
        return Err(ApiError::lifecycle("the survey is taken after the session ends"));
    }
    session.set_survey(survey).map_err(api)?;
    app.0.store.rewrite(&session).map_err(ApiError::from)?;
    Ok(Json(view(&session)))
}

#[derive(Serialize)]
struct MetricsResponse {
    session_id: String,
    /// `None` until the participant has written something.
    self_disclosure: Option<SelfDisclosureStats>,
    user_linguistic: Option<LinguisticMetrics>,
    agent_linguistic: Option<LinguisticMetrics>,
}

/// Joins turn texts into one document, closing unterminated turns with a period.
fn document<'a>(turns: impl Iterator<Item = &'a Turn>) -> String {
    let parts: Vec<String> = turns
        .map(|t| {
            let text = t.text.trim();
            if text.ends_with(['.', '!', '?']) {
                text.to_string()
            } else {
                format!("{text}.")
            }
        })
        .collect();
    parts.join(" ")
}

async fn session_metrics(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<MetricsResponse>, ApiError> {
    let h = handle(&app, &id)?;
    let session = h.lock().await.clone();
    let lex = &app.0.lexicons;
    let has_user = session.user_turns().next().is_some();
    let self_disclosure = if has_user {
        Some(self_disclosure(session.turns(), &lex.valence).map_err(api)?)
    } else {
        None
    };
    let ling = |role: Role| {
        let doc = document(session.turns().iter().filter(|t| t.role == role));
        if doc.is_empty() {
            None
        } else {
            linguistic_metrics(&doc, lex).ok()
        }
    };
    Ok(Json(MetricsResponse {
        session_id: id,
        self_disclosure,
        user_linguistic: ling(Role::User),
        agent_linguistic: ling(Role::Agent),
    }))
}

async fn session_transcript(State(app): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let h = handle(&app, &id)?;
    let bytes = export_transcript(&*h.lock().await);
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], bytes).into_response())
}
