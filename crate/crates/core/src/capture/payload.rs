//! The per-request user prompt document.

use serde::{Deserialize, Serialize};

use super::{FocusFrameGroup, LineCue, LineEnd, PointCue, SerializedRequest};
use crate::format::{to_pretty, Fixed2Vec};
use crate::scene::{object_entry, ObjectEntry, PlayerPose, Scene};

/// Which API surface a request may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskMode {
    /// Move/rotate/scale only.
    Task1,
    /// Full API including creation and deletion.
    #[default]
    Task2,
}

pub const ALL_ACTIONS: &str = "All the actions are available";
pub const NO_CREATE_DELETE: &str =
    "Creating and deleting objects are disabled, do not call CREATE(string prefab_id); or DELETE(string object_id); !";
pub const DEBUG_DISABLED: &str = "Debugging disabled, do not call EXPLAIN(string message); !";
pub const DEBUG_ENABLED: &str = "Debugging enabled, call EXPLAIN(string message); before each API call to explain it!";

impl TaskMode {
    pub fn enabled_actions(self) -> &'static str {
        match self {
            TaskMode::Task1 => NO_CREATE_DELETE,
            TaskMode::Task2 => ALL_ACTIONS,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PlayerEntry {
    pub position: Fixed2Vec,
    pub forward: Fixed2Vec,
    pub right: Fixed2Vec,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightEntry {
    #[serde(rename = "Object")]
    pub object: String,
    #[serde(rename = "Weight")]
    pub weight: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameEntry {
    #[serde(rename = "Stay Duration")]
    pub stay_duration: f64,
    #[serde(rename = "Speak words")]
    pub speak_words: String,
    #[serde(rename = "In Frustum Objects ID")]
    pub objects: Vec<WeightEntry>,
    #[serde(rename = "In Frustum Environment Objects ID")]
    pub environment: Vec<WeightEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct HitEntry {
    pub hit_id: String,
    pub object: String,
    pub position: Fixed2Vec,
    pub normal: Fixed2Vec,
}

#[derive(Debug, Clone, Serialize)]
pub struct LineEndEntry {
    pub object: String,
    pub position: Fixed2Vec,
    pub normal: Fixed2Vec,
}

#[derive(Debug, Clone, Serialize)]
pub struct LineEntry {
    #[serde(rename = "Id")]
    pub id: String,
    #[serde(rename = "Start")]
    pub start: LineEndEntry,
    #[serde(rename = "End")]
    pub end: LineEndEntry,
    #[serde(rename = "Project")]
    pub project: LineEndEntry,
}

/// Everything sent to the model for one utterance, in wire field order.
#[derive(Debug, Clone, Serialize)]
pub struct UserPromptPayload {
    pub player: PlayerEntry,
    pub objects: Vec<ObjectEntry>,
    pub head_stay_frames: Vec<FrameEntry>,
    pub hit_points: Vec<HitEntry>,
    pub drawing_lines: Vec<LineEntry>,
    pub user_request: String,
    pub user_request_with_actions_inserted: String,
    pub enabled_actions: String,
    pub step_explain: String,
}

impl PartialEq for UserPromptPayload {
    fn eq(&self, other: &Self) -> bool {
        self.to_json() == other.to_json()
    }
}

impl UserPromptPayload {
    /// Two-space pretty JSON, the form placed in the user message.
    pub fn to_json(&self) -> String {
        to_pretty(self, 2)
    }
}

fn line_end(e: &LineEnd) -> LineEndEntry {
    LineEndEntry {
        object: e.object.clone(),
        position: Fixed2Vec(e.position),
        normal: Fixed2Vec(e.normal),
    }
}

fn weights(list: &[(String, u64)]) -> Vec<WeightEntry> {
    list.iter()
        .map(|(object, weight)| WeightEntry {
            object: object.clone(),
            weight: *weight,
        })
        .collect()
}

/// Assembles the payload. `display_text` is the recogniser's formatted
/// transcript; when absent the plain word transcript is used.
#[allow(clippy::too_many_arguments)]
pub fn build_user_prompt(
    player: &PlayerPose,
    scene: &Scene,
    groups: &[FocusFrameGroup],
    points: &[PointCue],
    lines: &[LineCue],
    request: &SerializedRequest,
    display_text: Option<&str>,
    mode: TaskMode,
    debug: bool,
) -> UserPromptPayload {
    UserPromptPayload {
        player: PlayerEntry {
            position: Fixed2Vec(player.position),
            forward: Fixed2Vec(player.forward),
            right: Fixed2Vec(player.right),
        },
        objects: scene.objects().iter().map(object_entry).collect(),
        head_stay_frames: groups
            .iter()
            .map(|g| FrameEntry {
                stay_duration: g.stay_duration_s,
                speak_words: g.speak_words.clone(),
                objects: weights(&g.object_weights),
                environment: weights(&g.env_weights),
            })
            .collect(),
        hit_points: points
            .iter()
            .map(|p| HitEntry {
                hit_id: p.hit_id.clone(),
                object: p.object.clone(),
                position: Fixed2Vec(p.position),
                normal: Fixed2Vec(p.normal),
            })
            .collect(),
        drawing_lines: lines
            .iter()
            .map(|l| LineEntry {
                id: l.line_id.clone(),
                start: line_end(&l.start),
                end: line_end(&l.end),
                project: line_end(&l.project),
            })
            .collect(),
        user_request: display_text
            .map(str::to_string)
            .unwrap_or_else(|| request.plain.clone()),
        user_request_with_actions_inserted: request.annotated.clone(),
        enabled_actions: mode.enabled_actions().to_string(),
        step_explain: if debug { DEBUG_ENABLED } else { DEBUG_DISABLED }.to_string(),
    }
}
