//! Live event loop: one task per session, fed through an ordered queue, with
//! lossless per-observer fan-out.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use tokio::sync::{mpsc, oneshot};

use crate::gateway::{ChatProvider, MockProvider, OpenAiProvider, ProviderConfig};
use crate::scene::SceneFile;

use super::engine::{PendingRequest, Session};
use super::{IngestEvent, InteractionMode, SessionConfig, SessionError, SessionEvent, TaskMetrics};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "path", rename_all = "lowercase")]
pub enum ProviderChoice {
    #[default]
    None,
    /// Mock script (JSON array of entries).
    Mock(PathBuf),
    /// OpenAI-compatible endpoint config; the key comes from the environment.
    Endpoint(PathBuf),
}

/// Everything needed to start a live session.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub session: SessionConfig,
    /// Scene file; the shipped scene for the task when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<PathBuf>,
    #[serde(default)]
    pub provider: ProviderChoice,
    /// Where to write the JSONL trace while the session runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
    /// Log wall-clock first-action latency per request.
    #[serde(default)]
    pub measure_latency: bool,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), SessionError> {
        if self.session.mode == InteractionMode::Mover && self.provider == ProviderChoice::None {
            return Err(SessionError::Config(
                "mover mode needs a provider or mock script".into(),
            ));
        }
        if let Some(n) = self.session.history_chars {
            if n == 0 {
                return Err(SessionError::Config("history_chars must be positive".into()));
            }
        }
        Ok(())
    }
}

pub fn load_scene_file(path: &Path) -> Result<SceneFile, SessionError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| SessionError::SceneLoad(format!("{}: {e}", path.display())))?;
    SceneFile::from_json(&text).map_err(|e| SessionError::SceneLoad(format!("{}: {e}", path.display())))
}

pub fn load_provider(choice: &ProviderChoice) -> Result<Option<Arc<dyn ChatProvider>>, SessionError> {
    Ok(match choice {
        ProviderChoice::None => None,
        ProviderChoice::Mock(p) => Some(Arc::new(
            MockProvider::from_file(p).map_err(SessionError::ProviderInit)?,
        )),
        ProviderChoice::Endpoint(p) => {
            let cfg = ProviderConfig::from_file(p).map_err(SessionError::ProviderInit)?;
            if cfg.api_key().is_none() {
                tracing::warn!("{} is not set; sending requests without a key", cfg.api_key_env);
            }
            Some(Arc::new(OpenAiProvider::new(cfg).map_err(SessionError::ProviderInit)?))
        }
    })
}

/// Loads the scene and provider and starts the session loop.
pub fn run_session(cfg: &RunConfig) -> Result<SessionHandle, SessionError> {
    cfg.validate()?;
    let file = match &cfg.scene {
        Some(p) => load_scene_file(p)?,
        None => super::shipped_scene(cfg.session.task),
    };
    let mut session = Session::new(cfg.session.clone(), &file)?;
    let provider = load_provider(&cfg.provider)?;
    if let Some(path) = &cfg.trace {
        let f =
            std::fs::File::create(path).map_err(|e| SessionError::Config(format!("trace {}: {e}", path.display())))?;
        session
            .record_to(Box::new(f))
            .map_err(|e| SessionError::Config(format!("trace {}: {e}", path.display())))?;
    }
    Ok(spawn_session_with(session, provider, cfg.measure_latency))
}

pub fn spawn_session(session: Session, provider: Option<Arc<dyn ChatProvider>>) -> SessionHandle {
    spawn_session_with(session, provider, false)
}

fn spawn_session_with(session: Session, provider: Option<Arc<dyn ChatProvider>>, measure: bool) -> SessionHandle {
    let (tx, rx) = mpsc::channel(256);
    tokio::spawn(event_loop(session, provider, rx, measure));
    SessionHandle { tx }
}

/// Full scene state at a revision; what a reconnecting client resyncs from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSnapshot {
    pub revision: u64,
    pub scene: SceneFile,
}

enum Command {
    Ingest(IngestEvent),
    Subscribe(oneshot::Sender<(SceneSnapshot, mpsc::UnboundedReceiver<SessionEvent>)>),
    Snapshot(oneshot::Sender<SceneSnapshot>),
    Metrics(oneshot::Sender<TaskMetrics>),
    Trace(oneshot::Sender<String>),
    WhenIdle(oneshot::Sender<()>),
    Close(oneshot::Sender<String>),
}

enum Internal {
    Line {
        request_id: u64,
        offset_ms: u64,
        text: String,
    },
    End {
        request_id: u64,
        offset_ms: u64,
        error: Option<String>,
    },
}

#[derive(Debug, Clone)]
pub struct SessionHandle {
    tx: mpsc::Sender<Command>,
}

impl SessionHandle {
    async fn ask<T>(&self, make: impl FnOnce(oneshot::Sender<T>) -> Command) -> Result<T, SessionError> {
        let (tx, rx) = oneshot::channel();
        self.tx.send(make(tx)).await.map_err(|_| SessionError::Closed)?;
        rx.await.map_err(|_| SessionError::Closed)
    }

    pub async fn ingest(&self, ev: IngestEvent) -> Result<(), SessionError> {
        self.tx
            .send(Command::Ingest(ev))
            .await
            .map_err(|_| SessionError::Closed)
    }

    /// Registers an observer; the snapshot and the first event it receives
    /// are consistent (no revision is missed or duplicated).
    pub async fn subscribe(&self) -> Result<(SceneSnapshot, mpsc::UnboundedReceiver<SessionEvent>), SessionError> {
        self.ask(Command::Subscribe).await
    }

    pub async fn snapshot(&self) -> Result<SceneSnapshot, SessionError> {
        self.ask(Command::Snapshot).await
    }

    pub async fn metrics(&self) -> Result<TaskMetrics, SessionError> {
        self.ask(Command::Metrics).await
    }

    pub async fn trace(&self) -> Result<String, SessionError> {
        self.ask(Command::Trace).await
    }

    /// Resolves once no request is in flight or queued.
    pub async fn idle(&self) -> Result<(), SessionError> {
        self.ask(Command::WhenIdle).await
    }

    /// Ends the session and returns its trace.
    pub async fn close(&self) -> Result<String, SessionError> {
        self.ask(Command::Close).await
    }

    pub fn is_closed(&self) -> bool {
        self.tx.is_closed()
    }
}

fn snapshot(session: &Session) -> SceneSnapshot {
    SceneSnapshot {
        revision: session.scene().revision(),
        scene: session.scene().to_file(),
    }
}

fn broadcast(observers: &mut Vec<mpsc::UnboundedSender<SessionEvent>>, events: Vec<SessionEvent>) {
    for ev in events {
        observers.retain(|o| o.send(ev.clone()).is_ok());
    }
}

fn dispatch(req: PendingRequest, provider: &Option<Arc<dyn ChatProvider>>, itx: &mpsc::UnboundedSender<Internal>) {
    let request_id = req.request_id;
    let Some(provider) = provider.clone() else {
        let _ = itx.send(Internal::End {
            request_id,
            offset_ms: 0,
            error: Some("no provider configured".into()),
        });
        return;
    };
    let itx = itx.clone();
    tokio::spawn(async move {
        let started = Instant::now();
        let elapsed = || started.elapsed().as_millis() as u64;
        let mut stream = match provider.stream_chat(req.messages).await {
            Ok(s) => s,
            Err(e) => {
                let _ = itx.send(Internal::End {
                    request_id,
                    offset_ms: elapsed(),
                    error: Some(e.to_string()),
                });
                return;
            }
        };
        let mut error = None;
        while let Some(item) = stream.next().await {
            match item {
                Ok(line) => {
                    let sent = itx.send(Internal::Line {
                        request_id,
                        offset_ms: elapsed(),
                        text: line.text,
                    });
                    if sent.is_err() {
                        return;
                    }
                }
                Err(e) => {
                    error = Some(e.to_string());
                    break;
                }
            }
        }
        let _ = itx.send(Internal::End {
            request_id,
            offset_ms: elapsed(),
            error,
        });
    });
}

async fn event_loop(
    mut session: Session,
    provider: Option<Arc<dyn ChatProvider>>,
    mut rx: mpsc::Receiver<Command>,
    measure: bool,
) {
    let (itx, mut irx) = mpsc::unbounded_channel::<Internal>();
    let mut observers: Vec<mpsc::UnboundedSender<SessionEvent>> = Vec::new();
    let mut idle_waiters: Vec<oneshot::Sender<()>> = Vec::new();
    loop {
        tokio::select! {
            biased;
            Some(msg) = irx.recv() => match msg {
                Internal::Line { request_id, offset_ms, text } => {
                    let events = session.response_line(request_id, offset_ms, &text);
                    broadcast(&mut observers, events);
                }
                Internal::End { request_id, offset_ms, error } => {
                    let step = session.end_request(request_id, offset_ms, error);
                    if measure {
                        if let Some(l) = session.metrics().first_action_latency_s.last() {
                            tracing::info!(request_id, latency_s = l, "first action");
                        }
                    }
                    broadcast(&mut observers, step.events);
                    if let Some(req) = step.request {
                        dispatch(req, &provider, &itx);
                    }
                }
            },
            cmd = rx.recv() => match cmd {
                None => break,
                Some(Command::Ingest(ev)) => {
                    let step = session.ingest(ev);
                    broadcast(&mut observers, step.events);
                    if let Some(req) = step.request {
                        dispatch(req, &provider, &itx);
                    }
                }
                Some(Command::Subscribe(reply)) => {
                    let (tx, rx) = mpsc::unbounded_channel();
                    if reply.send((snapshot(&session), rx)).is_ok() {
                        observers.push(tx);
                    }
                }
                Some(Command::Snapshot(reply)) => {
                    let _ = reply.send(snapshot(&session));
                }
                Some(Command::Metrics(reply)) => {
                    let _ = reply.send(session.metrics().clone());
                }
                Some(Command::Trace(reply)) => {
                    let _ = reply.send(session.trace_jsonl());
                }
                Some(Command::WhenIdle(reply)) => idle_waiters.push(reply),
                Some(Command::Close(reply)) => {
                    session.close();
                    let _ = reply.send(session.trace_jsonl());
                    break;
                }
            },
        }
        if !session.is_busy() {
            for w in idle_waiters.drain(..) {
                let _ = w.send(());
            }
        }
    }
    session.close();
}
