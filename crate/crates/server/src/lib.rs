//! HTTP+JSON session service.
//!
//! Each session sits behind its own mutex, so mutations of one session are
//! serialized while other sessions proceed. Model work runs on the blocking
//! pool. With a data directory, every change is written to `<id>.json` and
//! sessions are reloaded on startup.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use prefmf_core::api::{CreateSessionRequest, ErrorBody, Health, PreferenceRequest, API_SCHEMA_VERSION};
use prefmf_core::session::{Session, SessionDocument, SessionError};
use serde_json::Value;

type Shared = Arc<Mutex<Session>>;

pub struct AppState {
    sessions: RwLock<HashMap<String, Shared>>,
    data_dir: Option<PathBuf>,
}

pub struct ApiError(SessionError);

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.0.http_status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(ErrorBody::new(self.0.code(), self.0.to_string()))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

fn write_atomic(path: &Path, text: &str) -> std::io::Result<()> {
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, text)?;
    std::fs::rename(tmp, path)
}

impl AppState {
    /// Create the state, loading any sessions saved in `data_dir`.
    pub fn new(data_dir: Option<PathBuf>) -> std::io::Result<Self> {
        let mut sessions = HashMap::new();
        if let Some(dir) = &data_dir {
            std::fs::create_dir_all(dir)?;
            for entry in std::fs::read_dir(dir)? {
                let path = entry?.path();
                if path.extension().and_then(|e| e.to_str()) != Some("json") {
                    continue;
                }
                let text = std::fs::read_to_string(&path)?;
                match Session::from_json(&text) {
                    Ok(s) => {
                        sessions.insert(s.id.clone(), Arc::new(Mutex::new(s)));
                    }
                    Err(e) => tracing::warn!(path = %path.display(), error = %e, "skipping unreadable session file"),
                }
            }
        }
        Ok(Self {
            sessions: RwLock::new(sessions),
            data_dir,
        })
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("session map").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn get(&self, id: &str) -> ApiResult<Shared> {
        self.sessions
            .read()
            .expect("session map")
            .get(id)
            .cloned()
            .ok_or_else(|| SessionError::NotFound(id.to_string()).into())
    }

    fn persist(&self, session: &Session) -> Result<(), SessionError> {
        let Some(dir) = &self.data_dir else {
            return Ok(());
        };
        write_atomic(&dir.join(format!("{}.json", session.id)), &session.to_json())
            .map_err(|e| SessionError::Internal(format!("persisting session: {e}")))
    }

    fn insert(&self, session: Session) -> ApiResult<Value> {
        let status = session.status();
        let mut map = self.sessions.write().expect("session map");
        if map.contains_key(&session.id) {
            return Err(SessionError::AlreadyExists(session.id).into());
        }
        self.persist(&session)?;
        map.insert(session.id.clone(), Arc::new(Mutex::new(session)));
        Ok(serde_json::to_value(status).expect("status serializes"))
    }
}

/// Run `f` against one session on the blocking pool.
async fn with_session<T, F>(state: Arc<AppState>, id: String, persist: bool, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&mut Session) -> Result<T, SessionError> + Send + 'static,
{
    let shared = state.get(&id)?;
    tokio::task::spawn_blocking(move || {
        let mut guard = shared.lock().unwrap_or_else(|p| p.into_inner());
        let out = f(&mut guard)?;
        if persist {
            state.persist(&guard)?;
        }
        Ok(out)
    })
    .await
    .map_err(|e| ApiError(SessionError::Internal(format!("worker failed: {e}"))))?
}

fn parse_body<T: serde::de::DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| SessionError::InvalidConfig(format!("bad request body: {e}")).into())
}

fn json<T: serde::Serialize>(v: T) -> Json<Value> {
    Json(serde_json::to_value(v).expect("response serializes"))
}

async fn health(State(state): State<Arc<AppState>>) -> Json<Health> {
    Json(Health {
        schema_version: API_SCHEMA_VERSION,
        status: "ok".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        sessions: state.len(),
    })
}

async fn create(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<(StatusCode, Json<Value>)> {
    let req: CreateSessionRequest = parse_body(&body)?;
    let id = uuid::Uuid::new_v4().to_string();
    let st = state.clone();
    let status = tokio::task::spawn_blocking(move || {
        let session = Session::create(id, req)?;
        st.insert(session)
    })
    .await
    .map_err(|e| ApiError(SessionError::Internal(format!("worker failed: {e}"))))??;
    Ok((StatusCode::CREATED, Json(status)))
}

async fn import(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<(StatusCode, Json<Value>)> {
    let doc: SessionDocument = parse_body(&body)?;
    if !valid_id(&doc.session.id) {
        return Err(SessionError::InvalidConfig(format!("invalid session id `{}`", doc.session.id)).into());
    }
    let session = Session::import(doc)?;
    let status = state.insert(session)?;
    Ok((StatusCode::CREATED, Json(status)))
}

async fn status(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    with_session(state, id, false, |s| Ok(json(s.status()))).await
}

async fn next_query(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    with_session(state, id, true, |s| s.next_query().map(json)).await
}

async fn preference(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>, body: Bytes) -> ApiResult<Json<Value>> {
    let req: PreferenceRequest = parse_body(&body)?;
    if req.schema_version != API_SCHEMA_VERSION {
        return Err(SessionError::InvalidConfig(format!("unsupported schema_version {}", req.schema_version)).into());
    }
    with_session(state, id, true, move |s| s.post_preference(req.winner).map(json)).await
}

async fn export(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    with_session(state, id, false, |s| Ok(json(s.export()))).await
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/sessions", post(create))
        .route("/v1/sessions/import", post(import))
        .route("/v1/sessions/{id}", get(status))
        .route("/v1/sessions/{id}/query", get(next_query))
        .route("/v1/sessions/{id}/preference", post(preference))
        .route("/v1/sessions/{id}/export", get(export))
        .with_state(state)
}

/// Bind and serve until the process is stopped.
pub async fn serve(addr: SocketAddr, data_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    serve_on(listener, data_dir).await
}

pub async fn serve_on(listener: tokio::net::TcpListener, data_dir: Option<PathBuf>) -> std::io::Result<()> {
    let state = Arc::new(AppState::new(data_dir)?);
    tracing::info!(addr = %listener.local_addr()?, sessions = state.len(), "serving");
    axum::serve(listener, router(state)).await
}
