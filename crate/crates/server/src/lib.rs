//! HTTP front end of a live session.
//!
//! Every mutation goes through one lock around the [`SessionService`], so
//! concurrent requests are applied one at a time in the order they acquire
//! it. Each accepted mutation is announced on `/stream` as an
//! [`Update`](ecolayout_core::session::Update) carrying the new version.

use axum::extract::{Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use ecolayout_core::instances::{demo_ecology, demo_session};
use ecolayout_core::interaction::RawInteraction;
use ecolayout_core::log::LogError;
use ecolayout_core::session::Update;
use ecolayout_core::{
    DisplayEcology, EngineParams, EventDraft, EventPayload, LogFilter, QualityWeights, SessionError, SessionModel,
    SessionService, UserId,
};
use futures::Stream;
use serde::{Deserialize, Serialize};
use std::convert::Infallible;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};
use tokio::sync::broadcast;

/// Environment variable naming the data directory.
pub const DATA_DIR_ENV: &str = "ECOLAYOUT_DATA_DIR";
/// Header carrying the acting user.
pub const USER_HEADER: &str = "x-user-id";
/// Journal file inside the data directory.
pub const JOURNAL_FILE: &str = "session.jsonl";

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Shared>,
}

struct Shared {
    service: Mutex<SessionService>,
    updates: broadcast::Sender<Update>,
}

impl AppState {
    pub fn new(service: SessionService) -> Self {
        let (updates, _) = broadcast::channel(256);
        Self {
            inner: Arc::new(Shared {
                service: Mutex::new(service),
                updates,
            }),
        }
    }

    fn lock(&self) -> MutexGuard<'_, SessionService> {
        // a panic inside a mutation leaves the service as it was before the
        // panicking call returned, so the poison flag carries no information
        self.inner.service.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn subscribe(&self) -> broadcast::Receiver<Update> {
        self.inner.updates.subscribe()
    }

    /// Runs `f` on the service off the async threads and broadcasts the
    /// update it returns.
    async fn mutate<T, F>(&self, f: F) -> Result<T, ApiError>
    where
        T: Send + 'static,
        F: FnOnce(&mut SessionService) -> Result<(T, Update), SessionError> + Send + 'static,
    {
        let me = self.clone();
        tokio::task::spawn_blocking(move || {
            let mut service = me.lock();
            let (out, update) = f(&mut service)?;
            // nobody listening is fine
            let _ = me.inner.updates.send(update);
            Ok(out)
        })
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
    }

    fn read<T>(&self, f: impl FnOnce(&SessionService) -> T) -> T {
        f(&self.lock())
    }
}

/// Opens the session kept in `data_dir`: the journal if there is one,
/// otherwise `session.json` and `ecology.json` from the directory, otherwise
/// the bundled demo. The journal is attached so every mutation is persisted.
pub fn open_service(data_dir: Option<&Path>, params: EngineParams) -> Result<SessionService, SessionError> {
    let Some(dir) = data_dir else {
        return SessionService::with_params(demo_session(), demo_ecology(), QualityWeights::default(), params);
    };
    std::fs::create_dir_all(dir)?;
    let journal = dir.join(JOURNAL_FILE);
    let mut service = if journal.exists() {
        SessionService::restore(&journal, params)?
    } else {
        let (session_path, ecology_path) = (dir.join("session.json"), dir.join("ecology.json"));
        let session = match std::fs::read_to_string(&session_path) {
            Ok(text) => SessionModel::from_json(&text).map_err(|e| SessionError::RejectInvalid(format!("{}: {e}", session_path.display())))?,
            Err(_) => demo_session(),
        };
        let ecology = match std::fs::read_to_string(&ecology_path) {
            Ok(text) => DisplayEcology::from_json(&text).map_err(|e| SessionError::RejectInvalid(format!("{}: {e}", ecology_path.display())))?,
            Err(_) => demo_ecology(),
        };
        SessionService::with_params(session, ecology, QualityWeights::default(), params)?
    };
    service.attach_journal(journal)?;
    Ok(service)
}

/// Data directory from the environment, if set.
pub fn data_dir_from_env() -> Option<PathBuf> {
    std::env::var_os(DATA_DIR_ENV).map(PathBuf::from)
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/session", get(get_session).put(put_session))
        .route("/ecology", get(get_ecology).put(put_ecology))
        .route("/layout", get(get_layout))
        .route("/state", get(get_state))
        .route("/events", post(post_event))
        .route("/undo", post(post_undo))
        .route("/redo", post(post_redo))
        .route("/checkout", post(post_checkout))
        .route("/selective-undo", post(post_selective_undo))
        .route("/log/graph", get(get_log_graph))
        .route("/log/query", get(get_log_query))
        .route("/interactions", post(post_interaction))
        .route("/step/advance", post(post_advance))
        .route("/step/goto", post(post_goto))
        .route("/stream", get(stream))
        .with_state(state)
}

pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, message)
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let status = match &e {
            SessionError::RejectInvalid(_) => StatusCode::UNPROCESSABLE_ENTITY,
            SessionError::Log(LogError::UnknownNode(_)) => StatusCode::NOT_FOUND,
            SessionError::Log(_) => StatusCode::CONFLICT,
            SessionError::Interaction(_) => StatusCode::BAD_REQUEST,
            SessionError::CorruptSnapshot(_) | SessionError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn actor(headers: &HeaderMap) -> Result<UserId, ApiError> {
    let id = headers
        .get(USER_HEADER)
        .and_then(|v| v.to_str().ok())
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "missing X-User-Id header"))?;
    let id = UserId::from(id);
    if id.is_system() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "the system user cannot submit events"));
    }
    Ok(id)
}

async fn get_session(State(s): State<AppState>) -> Json<SessionModel> {
    Json(s.read(|svc| svc.state().live.session.clone()))
}

async fn put_session(State(s): State<AppState>, headers: HeaderMap, Json(session): Json<SessionModel>) -> ApiResult<Update> {
    let draft = EventDraft::new(actor(&headers)?, EventPayload::SessionReplace { session });
    apply(s, draft).await
}

async fn get_ecology(State(s): State<AppState>) -> Json<DisplayEcology> {
    Json(s.read(|svc| svc.state().live.ecology.clone()))
}

async fn put_ecology(State(s): State<AppState>, headers: HeaderMap, Json(ecology): Json<DisplayEcology>) -> ApiResult<Update> {
    let draft = EventDraft::new(actor(&headers)?, EventPayload::EcologyReplace { ecology });
    apply(s, draft).await
}

async fn apply(s: AppState, draft: EventDraft) -> ApiResult<Update> {
    s.mutate(move |svc| svc.apply(draft).map(|u| (u.clone(), u))).await.map(Json)
}

#[derive(Debug, Deserialize)]
struct StepQuery {
    step: Option<usize>,
}

async fn get_layout(State(s): State<AppState>, Query(q): Query<StepQuery>) -> Response {
    s.read(|svc| {
        let st = svc.state();
        let step = q.step.unwrap_or(st.live.step);
        match st.layouts.get(&step) {
            Some(l) => (StatusCode::OK, l.to_json(false)).into_response(),
            None => {
                let why = match &st.layout_error {
                    Some(e) if step == st.live.step => e.clone(),
                    _ => format!("no layout for step {step}"),
                };
                ApiError::new(StatusCode::NOT_FOUND, why).into_response()
            }
        }
    })
}

async fn get_state(State(s): State<AppState>) -> Json<ecolayout_core::session::StateSummary> {
    Json(s.read(SessionService::summary))
}

/// Body of `POST /events`: the payload fields next to its `kind` tag, plus
/// optional touched view/display and wall time.
#[derive(Debug, Deserialize)]
struct EventRequest {
    #[serde(flatten)]
    payload: EventPayload,
    #[serde(default)]
    touched_view: Option<ecolayout_core::ViewId>,
    #[serde(default)]
    touched_display: Option<ecolayout_core::DisplayId>,
    #[serde(default)]
    wall_time: Option<u64>,
}

async fn post_event(State(s): State<AppState>, headers: HeaderMap, Json(req): Json<EventRequest>) -> ApiResult<Update> {
    let mut draft = EventDraft::new(actor(&headers)?, req.payload);
    draft.touched_view = req.touched_view;
    draft.touched_display = req.touched_display;
    draft.wall_time = req.wall_time;
    apply(s, draft).await
}

async fn post_undo(State(s): State<AppState>, headers: HeaderMap) -> ApiResult<Update> {
    actor(&headers)?;
    s.mutate(|svc| svc.undo().map(|u| (u.clone(), u))).await.map(Json)
}

#[derive(Debug, Default, Deserialize)]
struct RedoRequest {
    #[serde(default)]
    index: Option<usize>,
}

async fn post_redo(State(s): State<AppState>, headers: HeaderMap, body: Option<Json<RedoRequest>>) -> ApiResult<Update> {
    actor(&headers)?;
    let index = body.map(|b| b.0).unwrap_or_default().index;
    s.mutate(move |svc| svc.redo(index).map(|u| (u.clone(), u))).await.map(Json)
}

#[derive(Debug, Deserialize)]
struct CheckoutRequest {
    event: ecolayout_core::EventId,
}

async fn post_checkout(State(s): State<AppState>, headers: HeaderMap, Json(req): Json<CheckoutRequest>) -> ApiResult<Update> {
    actor(&headers)?;
    s.mutate(move |svc| svc.checkout(req.event).map(|u| (u.clone(), u))).await.map(Json)
}

#[derive(Debug, Serialize)]
struct SelectiveUndoResponse {
    update: Update,
    #[serde(flatten)]
    outcome: ecolayout_core::log::SelectiveUndo,
}

async fn post_selective_undo(
    State(s): State<AppState>,
    headers: HeaderMap,
    Json(filter): Json<LogFilter>,
) -> ApiResult<SelectiveUndoResponse> {
    let who = actor(&headers)?;
    s.mutate(move |svc| {
        let (update, outcome) = svc.selective_undo(&filter, who);
        Ok((
            SelectiveUndoResponse {
                update: update.clone(),
                outcome,
            },
            update,
        ))
    })
    .await
    .map(Json)
}

async fn get_log_graph(State(s): State<AppState>) -> Json<ecolayout_core::log::LogGraph> {
    Json(s.read(|svc| svc.state().log.graph()))
}

/// Query string of `GET /log/query`. List criteria are comma separated.
#[derive(Debug, Default, Deserialize)]
struct LogQuery {
    actor: Option<String>,
    kind: Option<String>,
    view: Option<String>,
    display: Option<String>,
    from: Option<u64>,
    to: Option<u64>,
    #[serde(default)]
    findings: bool,
}

impl LogQuery {
    fn filter(&self) -> Result<LogFilter, ApiError> {
        fn list<T: Ord>(raw: &Option<String>, conv: impl Fn(&str) -> Result<T, String>) -> Result<Option<std::collections::BTreeSet<T>>, ApiError> {
            raw.as_deref()
                .map(|s| {
                    s.split(',')
                        .filter(|p| !p.is_empty())
                        .map(|p| conv(p).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e)))
                        .collect()
                })
                .transpose()
        }
        let time_range = match (self.from, self.to) {
            (None, None) => None,
            (from, to) => Some((from.unwrap_or(0), to.unwrap_or(u64::MAX))),
        };
        Ok(LogFilter {
            actors: list(&self.actor, |p| Ok(UserId::from(p)))?,
            kinds: list(&self.kind, |p| p.parse())?,
            views: list(&self.view, |p| Ok(p.into()))?,
            displays: list(&self.display, |p| Ok(p.into()))?,
            time_range,
            findings_only: self.findings,
        })
    }
}

async fn get_log_query(State(s): State<AppState>, Query(q): Query<LogQuery>) -> ApiResult<Vec<ecolayout_core::LogEvent>> {
    let filter = q.filter()?;
    Ok(Json(s.read(|svc| svc.state().log.query(&filter).into_iter().cloned().collect())))
}

async fn post_interaction(
    State(s): State<AppState>,
    Json(raw): Json<RawInteraction>,
) -> ApiResult<Option<ecolayout_core::interaction::MappedInteraction>> {
    Ok(Json(s.read(|svc| svc.map_interaction(&raw))?))
}

async fn post_advance(State(s): State<AppState>, headers: HeaderMap) -> ApiResult<Update> {
    apply(s, EventDraft::new(actor(&headers)?, EventPayload::StepAdvance)).await
}

#[derive(Debug, Deserialize)]
struct GotoRequest {
    step: usize,
}

async fn post_goto(State(s): State<AppState>, headers: HeaderMap, Json(req): Json<GotoRequest>) -> ApiResult<Update> {
    apply(s, EventDraft::new(actor(&headers)?, EventPayload::StepGoto { step: req.step })).await
}

/// Server-sent events: one `hello` with the current summary, then an
/// `update` per accepted mutation. A client that fell behind gets `lagged`
/// and should re-fetch.
async fn stream(State(s): State<AppState>) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let rx = s.subscribe();
    let hello = Event::default()
        .event("hello")
        .json_data(s.read(SessionService::summary))
        .expect("summary serializes");
    let updates = futures::stream::unfold(rx, |mut rx| async move {
        let event = match rx.recv().await {
            Ok(u) => Event::default().event("update").json_data(&u).expect("update serializes"),
            Err(broadcast::error::RecvError::Lagged(n)) => Event::default().event("lagged").data(n.to_string()),
            Err(broadcast::error::RecvError::Closed) => return None,
        };
        Some((Ok(event), rx))
    });
    let events = futures::StreamExt::chain(futures::stream::once(async { Ok(hello) }), updates);
    Sse::new(events).keep_alive(KeepAlive::default())
}
