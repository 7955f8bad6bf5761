//! HTTP + WebSocket front end for live sessions. Frame format: docs/protocol.md.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use futures::{SinkExt, StreamExt};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::session::{run_session, IngestEvent, InteractionMode, RunConfig, SessionError, SessionHandle, TaskKind};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

/// Settings for every session the server creates.
#[derive(Debug, Clone, Default)]
pub struct ServerConfig {
    pub defaults: RunConfig,
    /// One `<session id>.jsonl` trace per session is written here.
    pub trace_dir: Option<PathBuf>,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    config: ServerConfig,
    sessions: Mutex<HashMap<String, SessionHandle>>,
    next_id: AtomicU64,
}

impl AppState {
    pub fn new(config: ServerConfig) -> Self {
        Self {
            inner: Arc::new(Inner {
                config,
                sessions: Mutex::default(),
                next_id: AtomicU64::new(1),
            }),
        }
    }

    fn get(&self, id: &str) -> Option<SessionHandle> {
        self.inner.sessions.lock().expect("sessions lock").get(id).cloned()
    }

    /// Creates a session with optional per-session overrides.
    pub fn create(&self, overrides: SessionOverrides) -> Result<String, SessionError> {
        let id = format!("s{}", self.inner.next_id.fetch_add(1, Ordering::Relaxed));
        let mut cfg = self.inner.config.defaults.clone();
        if let Some(m) = overrides.mode {
            cfg.session.mode = m;
        }
        if let Some(t) = overrides.task {
            cfg.session.task = t;
        }
        if let Some(d) = overrides.debug {
            cfg.session.debug = d;
        }
        if let Some(s) = overrides.scene {
            cfg.scene = Some(s);
        }
        if let Some(dir) = &self.inner.config.trace_dir {
            cfg.trace = Some(dir.join(format!("{id}.jsonl")));
        }
        let handle = run_session(&cfg)?;
        self.inner
            .sessions
            .lock()
            .expect("sessions lock")
            .insert(id.clone(), handle);
        Ok(id)
    }

    fn remove(&self, id: &str) -> Option<SessionHandle> {
        self.inner.sessions.lock().expect("sessions lock").remove(id)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SessionOverrides {
    #[serde(default)]
    pub mode: Option<InteractionMode>,
    #[serde(default)]
    pub task: Option<TaskKind>,
    #[serde(default)]
    pub debug: Option<bool>,
    #[serde(default)]
    pub scene: Option<PathBuf>,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", get(list_sessions).post(create_session))
        .route("/sessions/{id}", axum::routing::delete(delete_session))
        .route("/sessions/{id}/scene", get(get_scene))
        .route("/sessions/{id}/metrics", get(get_metrics))
        .route("/sessions/{id}/trace", get(get_trace))
        .route("/sessions/{id}/ws", get(ws_upgrade))
        .with_state(state)
}

pub async fn bind(addr: &str) -> Result<tokio::net::TcpListener, ServeError> {
    tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| ServeError::Bind {
            addr: addr.to_string(),
            source,
        })
}

/// Serves until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> Result<(), ServeError> {
    let addr: Option<SocketAddr> = listener.local_addr().ok();
    tracing::info!(?addr, "listening");
    axum::serve(listener, router(state)).await?;
    Ok(())
}

fn error(status: StatusCode, message: impl std::fmt::Display) -> Response {
    (status, Json(json!({ "error": message.to_string() }))).into_response()
}

fn not_found(id: &str) -> Response {
    error(StatusCode::NOT_FOUND, format!("no session {id}"))
}

async fn list_sessions(State(state): State<AppState>) -> Json<Vec<String>> {
    let mut ids: Vec<String> = state
        .inner
        .sessions
        .lock()
        .expect("sessions lock")
        .keys()
        .cloned()
        .collect();
    ids.sort();
    Json(ids)
}

async fn create_session(State(state): State<AppState>, body: Option<Json<SessionOverrides>>) -> Response {
    let overrides = body.map(|Json(b)| b).unwrap_or_default();
    match state.create(overrides) {
        Ok(id) => (StatusCode::CREATED, Json(json!({ "session_id": id }))).into_response(),
        Err(e) => error(StatusCode::BAD_REQUEST, e),
    }
}

async fn delete_session(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    match state.remove(&id) {
        Some(h) => {
            let _ = h.close().await;
            StatusCode::NO_CONTENT.into_response()
        }
        None => not_found(&id),
    }
}

async fn get_scene(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    let Some(h) = state.get(&id) else { return not_found(&id) };
    match h.snapshot().await {
        Ok(s) => Json(s).into_response(),
        Err(e) => error(StatusCode::GONE, e),
    }
}

async fn get_metrics(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    let Some(h) = state.get(&id) else { return not_found(&id) };
    match h.metrics().await {
        Ok(m) => Json(m).into_response(),
        Err(e) => error(StatusCode::GONE, e),
    }
}

async fn get_trace(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    let Some(h) = state.get(&id) else { return not_found(&id) };
    match h.trace().await {
        Ok(t) => ([("content-type", "application/x-ndjson")], t).into_response(),
        Err(e) => error(StatusCode::GONE, e),
    }
}

async fn ws_upgrade(State(state): State<AppState>, Path(id): Path<String>, ws: WebSocketUpgrade) -> Response {
    let Some(h) = state.get(&id) else { return not_found(&id) };
    ws.on_upgrade(move |socket| connection(socket, id, h))
}

/// What a client frame asks for.
#[derive(Debug, PartialEq)]
pub enum ClientFrame {
    Hello,
    Ingest(IngestEvent),
}

/// Parses a client text frame (`hello` or `ingest.*`).
pub fn parse_client_frame(text: &str) -> Result<ClientFrame, String> {
    let mut v: Value = serde_json::from_str(text).map_err(|e| format!("invalid JSON: {e}"))?;
    let kind = v
        .get("type")
        .and_then(Value::as_str)
        .ok_or("frame has no type")?
        .to_string();
    if kind == "hello" {
        return Ok(ClientFrame::Hello);
    }
    let Some(bare) = kind.strip_prefix("ingest.").filter(|k| IngestEvent::KINDS.contains(k)) else {
        return Err(format!("unknown frame type {kind:?}"));
    };
    v["type"] = Value::String(bare.to_string());
    serde_json::from_value(v)
        .map(ClientFrame::Ingest)
        .map_err(|e| format!("bad {kind} frame: {e}"))
}

fn text(v: &impl Serialize) -> Message {
    Message::Text(serde_json::to_string(v).expect("frame serializes").into())
}

async fn connection(socket: WebSocket, id: String, handle: SessionHandle) {
    let (mut tx, mut rx) = socket.split();
    let Ok((snap, mut events)) = handle.subscribe().await else {
        let _ = tx
            .send(text(&json!({"type": "error", "message": "session closed"})))
            .await;
        return;
    };
    let hello = json!({
        "type": "hello",
        "protocol": PROTOCOL_VERSION,
        "session_id": id,
        "revision": snap.revision,
        "scene": snap.scene,
    });
    if tx.send(text(&hello)).await.is_err() {
        return;
    }
    loop {
        tokio::select! {
            ev = events.recv() => match ev {
                Some(ev) => {
                    if tx.send(text(&ev)).await.is_err() {
                        return;
                    }
                }
                None => break,
            },
            msg = rx.next() => {
                let reason = match msg {
                    None | Some(Err(_)) | Some(Ok(Message::Close(_))) => return,
                    Some(Ok(Message::Ping(_) | Message::Pong(_))) => continue,
                    Some(Ok(Message::Binary(_))) => "binary frames are not supported".to_string(),
                    Some(Ok(Message::Text(t))) => match parse_client_frame(&t) {
                        Ok(ClientFrame::Hello) => continue,
                        Ok(ClientFrame::Ingest(ev)) => {
                            if handle.ingest(ev).await.is_err() {
                                break;
                            }
                            continue;
                        }
                        Err(reason) => reason,
                    },
                };
                // Protocol errors end this connection only.
                let _ = tx.send(text(&json!({"type": "error", "message": reason}))).await;
                let _ = tx.send(Message::Close(None)).await;
                return;
            }
        }
    }
    let _ = tx
        .send(text(&json!({"type": "error", "message": "session closed"})))
        .await;
    let _ = tx.send(Message::Close(None)).await;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn client_frames() {
        assert_eq!(parse_client_frame(r#"{"type":"hello"}"#), Ok(ClientFrame::Hello));
        let f = parse_client_frame(r#"{"type":"ingest.word","text":"hi","start_ms":0,"end_ms":5}"#).unwrap();
        assert!(matches!(f, ClientFrame::Ingest(IngestEvent::Word { .. })));
        let f = parse_client_frame(
            r#"{"type":"ingest.point","t_ms":3,"target":{"origin":{"x":0,"y":1,"z":0},"direction":{"x":0,"y":-1,"z":0}}}"#,
        )
        .unwrap();
        assert!(matches!(f, ClientFrame::Ingest(IngestEvent::Point { .. })));
        assert!(parse_client_frame(r#"{"type":"word","text":"hi","start_ms":0,"end_ms":5}"#).is_err());
        assert!(parse_client_frame(r#"{"type":"ingest.word"}"#).is_err());
        assert!(parse_client_frame("{").is_err());
    }
}
