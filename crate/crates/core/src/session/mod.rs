//! Session orchestration: capture → gateway → runtime, with metrics,
//! deterministic traces and a live event loop.

pub mod driver;
pub mod engine;
pub mod metrics;
pub mod trace;

use serde::{Deserialize, Serialize};

use crate::capture::{CaptureSettings, TaskMode};
use crate::gateway::GatewayError;
use crate::geometry::Vec3;
use crate::runtime::SceneChange;
use crate::scene::{ObjectSpec, RayHit, Scene, SceneFile};

pub use driver::{
    load_provider, load_scene_file, run_session, spawn_session, ProviderChoice, RunConfig, SceneSnapshot, SessionHandle,
};
pub use engine::{PendingRequest, Session, Step};
pub use metrics::{
    accumulate_hand_distance, check_target, status_for_distance, Hand, MetricsTracker, TargetMetrics, TargetStatus,
    TaskMetrics, COARSE_THRESHOLD_M, FINE_THRESHOLD_M,
};
pub use trace::{replay_trace, OutcomeEntry, Replay, TraceError, TraceHeader, TraceRecord, TRACE_VERSION};

/// Interaction technique.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InteractionMode {
    /// Direct manipulation only; speech is ignored.
    Control,
    /// Keyword grammar, no model.
    Voice,
    /// Multimodal requests to the model.
    #[default]
    Mover,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Task1a,
    Task1b,
    #[default]
    Sandbox,
}

impl TaskKind {
    pub fn task_mode(self) -> TaskMode {
        match self {
            TaskKind::Task1a | TaskKind::Task1b => TaskMode::Task1,
            TaskKind::Sandbox => TaskMode::Task2,
        }
    }
}

const TASK1A_SCENE: &str = include_str!("../../scenes/task1a.json");
const TASK1B_SCENE: &str = include_str!("../../scenes/task1b.json");
const SANDBOX_SCENE: &str = include_str!("../../scenes/sandbox.json");

/// The scene that ships with each task.
pub fn shipped_scene(task: TaskKind) -> SceneFile {
    let text = match task {
        TaskKind::Task1a => TASK1A_SCENE,
        TaskKind::Task1b => TASK1B_SCENE,
        TaskKind::Sandbox => SANDBOX_SCENE,
    };
    SceneFile::from_json(text).expect("shipped scenes are valid")
}

/// Engine settings; stored in every trace header.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    #[serde(default)]
    pub mode: InteractionMode,
    #[serde(default)]
    pub task: TaskKind,
    /// Ask the model to EXPLAIN each call.
    #[serde(default)]
    pub debug: bool,
    #[serde(default)]
    pub capture: CaptureSettings,
    /// Character budget for the request; oldest history goes first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub history_chars: Option<usize>,
}

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("config error: {0}")]
    Config(String),
    #[error("scene load error: {0}")]
    SceneLoad(String),
    #[error("provider init error: {0}")]
    ProviderInit(GatewayError),
    #[error("session closed")]
    Closed,
}

/// Where a pointing gesture landed. Clients either send their own hit or a
/// ray for the service to cast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Aim {
    Hit(RayHit),
    Ray { origin: Vec3, direction: Vec3 },
}

impl Aim {
    pub fn resolve(&self, scene: &Scene) -> Option<RayHit> {
        match self {
            Aim::Hit(h) => Some(h.clone()),
            Aim::Ray { origin, direction } => scene.raycast(*origin, *direction),
        }
    }
}

/// Inputs to a session. In traces the tag is the bare name (`word`); on the
/// wire it carries an `ingest.` prefix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum IngestEvent {
    Word {
        text: String,
        start_ms: u64,
        end_ms: u64,
    },
    Pose {
        t_ms: u64,
        position: Vec3,
        forward: Vec3,
        right: Vec3,
    },
    Point {
        t_ms: u64,
        target: Aim,
    },
    Line {
        start_ms: u64,
        duration_ms: u64,
        start: Aim,
        end_position: Vec3,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        release: Option<Aim>,
    },
    Finalize {
        t_ms: u64,
        /// Recogniser display text, if it differs from the joined words.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        display_text: Option<String>,
    },
    Select {
        t_ms: u64,
        object_ids: Vec<String>,
    },
    Hand {
        t_ms: u64,
        hand: Hand,
        position: Vec3,
    },
    /// Direct manipulation (grab/gizmo stand-in).
    Manipulate {
        t_ms: u64,
        object_id: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        position: Option<Vec3>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        forward: Option<Vec3>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scale: Option<Vec3>,
    },
}

impl IngestEvent {
    /// Session time at which the event is complete.
    pub fn t_ms(&self) -> u64 {
        match self {
            IngestEvent::Word { end_ms, .. } => *end_ms,
            IngestEvent::Line {
                start_ms, duration_ms, ..
            } => start_ms + duration_ms,
            IngestEvent::Pose { t_ms, .. }
            | IngestEvent::Point { t_ms, .. }
            | IngestEvent::Finalize { t_ms, .. }
            | IngestEvent::Select { t_ms, .. }
            | IngestEvent::Hand { t_ms, .. }
            | IngestEvent::Manipulate { t_ms, .. } => *t_ms,
        }
    }

    pub const KINDS: [&'static str; 8] = [
        "word",
        "pose",
        "point",
        "line",
        "finalize",
        "select",
        "hand",
        "manipulate",
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Llm,
    Voice,
    Control,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevisionEvent {
    pub revision: u64,
    pub t_ms: u64,
    pub source: Source,
    pub line: String,
    pub change: SceneChange,
    /// Object state after the change; absent for removals.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<ObjectSpec>,
}

/// Outputs of a session, as sent to observers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum SessionEvent {
    #[serde(rename = "event.revision")]
    Revision(RevisionEvent),
    #[serde(rename = "event.message")]
    Message { t_ms: u64, text: String, debug: bool },
    #[serde(rename = "event.warning")]
    Warning {
        t_ms: u64,
        kind: WarningKind,
        detail: String,
    },
    #[serde(rename = "event.metrics")]
    Metrics { t_ms: u64, metrics: TaskMetrics },
    #[serde(rename = "event.stream_end")]
    StreamEnd {
        request_id: u64,
        t_ms: u64,
        lines: usize,
        applied: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        error: Option<String>,
    },
    /// Acknowledges a gesture cue and its id.
    #[serde(rename = "event.cue")]
    Cue { t_ms: u64, cue_id: String, position: Vec3 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarningKind {
    /// Voice utterance did not fit the grammar; detail is the missing slot.
    NoMatch,
    /// Only interjections were heard.
    Filtered,
    /// A line or command was skipped by the runtime.
    Skipped,
    /// A pointing ray hit nothing.
    NoHit,
    /// Speech arrived in control mode.
    SpeechIgnored,
    /// A selection or manipulation named an unknown object.
    UnknownObject,
    /// The model request failed.
    Provider,
}
