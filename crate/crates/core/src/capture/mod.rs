//! Multimodal capture: timestamped words, head poses and gesture cues are
//! accumulated and frozen into a user prompt payload on end of speech.

pub mod focus;
pub mod interjection;
pub mod payload;
pub mod timeline;

use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;
use crate::scene::{RayHit, Scene};

pub use focus::{
    group_focus_frames, rank_group_objects, score_sample, segment_speech, FocusFrameGroup, RawGroup, ScoredSample,
};
pub use interjection::{filter_interjections, InterjectionFilter};
pub use payload::{build_user_prompt, TaskMode, UserPromptPayload};
pub use timeline::{serialize_time, strip_markers, SerializedRequest};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CaptureError {
    #[error("ray did not hit any object or environment surface")]
    NoHit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimedWord {
    pub text: String,
    pub start_ms: u64,
    pub end_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadSample {
    pub t_ms: u64,
    pub position: Vec3,
    pub forward: Vec3,
    pub right: Vec3,
}

impl HeadSample {
    /// Normalises the direction vectors; falls back to world axes when a
    /// direction is zero.
    pub fn normalized(mut self) -> Self {
        self.forward = self.forward.normalized().unwrap_or(Vec3::FORWARD);
        self.right = self.right.normalized().unwrap_or(Vec3::RIGHT);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCue {
    pub hit_id: String,
    pub t_ms: u64,
    pub object: String,
    pub position: Vec3,
    pub normal: Vec3,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LineEnd {
    pub object: String,
    pub position: Vec3,
    pub normal: Vec3,
}

impl From<RayHit> for LineEnd {
    fn from(h: RayHit) -> Self {
        Self {
            object: h.object,
            position: h.position,
            normal: h.normal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineCue {
    pub line_id: String,
    pub start_ms: u64,
    pub duration_ms: u64,
    pub start: LineEnd,
    /// Start plus the hand displacement while drawing. Its normal is the
    /// raw start→end vector.
    pub end: LineEnd,
    /// Surface hit when the button was released.
    pub project: LineEnd,
    /// Zero hand displacement: end equals start and its normal is zero.
    pub degenerate: bool,
}

/// Marker label for the object field of a line's drawn endpoint.
pub const END_POINT_LABEL: &str = "End point";

/// Builds a point cue; `index` is the ordinal within the current request.
pub fn record_point(hit: Option<RayHit>, t_ms: u64, index: usize) -> Result<PointCue, CaptureError> {
    let hit = hit.ok_or(CaptureError::NoHit)?;
    Ok(PointCue {
        hit_id: format!("h{index}"),
        t_ms,
        object: hit.object,
        position: hit.position,
        normal: hit.normal,
    })
}

/// Builds a line cue from the starting hit, the hand positions sampled
/// while drawing, and the hit at release (the start hit when the release
/// ray missed).
pub fn record_line(
    start: Option<RayHit>,
    start_ms: u64,
    duration_ms: u64,
    hand_path: &[Vec3],
    release: Option<RayHit>,
    index: usize,
) -> Result<LineCue, CaptureError> {
    let start = start.ok_or(CaptureError::NoHit)?;
    let displacement = hand_path.windows(2).fold(Vec3::ZERO, |acc, w| acc + (w[1] - w[0]));
    Ok(line_from_endpoint(
        start.clone(),
        start.position + displacement,
        release,
        start_ms,
        duration_ms,
        index,
    ))
}

/// Builds a line cue when the drawn endpoint is already known.
pub fn line_from_endpoint(
    start: RayHit,
    end_position: Vec3,
    release: Option<RayHit>,
    start_ms: u64,
    duration_ms: u64,
    index: usize,
) -> LineCue {
    let delta = end_position - start.position;
    let project = release.unwrap_or_else(|| start.clone());
    LineCue {
        line_id: format!("d{index}"),
        start_ms,
        duration_ms,
        degenerate: delta.normalized().is_none(),
        end: LineEnd {
            object: END_POINT_LABEL.to_string(),
            position: end_position,
            normal: delta,
        },
        start: start.into(),
        project: project.into(),
    }
}

/// Tunables for focus frames and ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CaptureSettings {
    pub angular_threshold_deg: f64,
    pub min_duration_ms: u64,
    pub score_scale: f64,
    pub fov_h_deg: f64,
    pub fov_v_deg: f64,
    /// Groups ending more than this long before the first word are not sent.
    pub speech_lookback_ms: u64,
}

impl Default for CaptureSettings {
    fn default() -> Self {
        Self {
            angular_threshold_deg: 15.0,
            min_duration_ms: 1000,
            score_scale: 10.0,
            fov_h_deg: 90.0,
            fov_v_deg: 90.0,
            speech_lookback_ms: 15_000,
        }
    }
}

/// Result of freezing the accumulator at end of speech.
#[derive(Debug, Clone, PartialEq)]
pub enum Finalized {
    /// Nothing but interjections (or nothing at all) was said.
    Filtered {
        transcript: String,
    },
    Payload(Box<UserPromptPayload>),
}

/// Collects the three input streams between two end-of-speech events.
#[derive(Debug, Clone, Default)]
pub struct CaptureAccumulator {
    pub settings: CaptureSettings,
    filter: InterjectionFilter,
    words: Vec<TimedWord>,
    samples: Vec<ScoredSample>,
    points: Vec<PointCue>,
    lines: Vec<LineCue>,
    latest_pose: Option<HeadSample>,
}

impl CaptureAccumulator {
    pub fn new(settings: CaptureSettings) -> Self {
        Self {
            settings,
            ..Default::default()
        }
    }

    pub fn push_word(&mut self, word: TimedWord) {
        self.words.push(word);
    }

    /// Stores a head sample scored against the current scene.
    pub fn push_pose(&mut self, sample: HeadSample, scene: &Scene) {
        let sample = sample.normalized();
        self.latest_pose = Some(sample.clone());
        self.samples.push(score_sample(&sample, scene, &self.settings));
    }

    pub fn push_point(&mut self, hit: Option<RayHit>, t_ms: u64) -> Result<&PointCue, CaptureError> {
        let cue = record_point(hit, t_ms, self.points.len())?;
        self.points.push(cue);
        Ok(self.points.last().expect("just pushed"))
    }

    pub fn push_line(
        &mut self,
        start: RayHit,
        end_position: Vec3,
        release: Option<RayHit>,
        start_ms: u64,
        duration_ms: u64,
    ) -> &LineCue {
        let cue = line_from_endpoint(start, end_position, release, start_ms, duration_ms, self.lines.len());
        self.lines.push(cue);
        self.lines.last().expect("just pushed")
    }

    pub fn latest_pose(&self) -> Option<&HeadSample> {
        self.latest_pose.as_ref()
    }

    pub fn words(&self) -> &[TimedWord] {
        &self.words
    }

    /// Plain transcript of the words collected so far.
    pub fn transcript(&self) -> String {
        let mut words = self.words.clone();
        words.sort_by_key(|w| w.start_ms);
        focus::spoken_text(&words)
    }

    /// Focus groups relevant to the pending utterance, with ranking and
    /// speech segments filled in.
    pub fn focus_groups(&self, words: &[TimedWord]) -> Vec<FocusFrameGroup> {
        let heads: Vec<HeadSample> = self.samples.iter().map(|s| s.sample.clone()).collect();
        let raw = group_focus_frames(
            &heads,
            self.settings.angular_threshold_deg,
            self.settings.min_duration_ms,
        );
        let (first, last) = match (words.first(), words.last()) {
            (Some(f), Some(l)) => (f.start_ms, l.end_ms),
            _ => return Vec::new(),
        };
        let window_start = first.saturating_sub(self.settings.speech_lookback_ms);
        let raw: Vec<RawGroup> = raw
            .into_iter()
            .filter(|g| g.end_ms >= window_start && g.start_ms <= last)
            .collect();
        let spans: Vec<(u64, u64)> = raw.iter().map(|g| (g.start_ms, g.end_ms)).collect();
        let speech = segment_speech(words, &spans);
        raw.iter()
            .zip(speech)
            .map(|(g, ws)| {
                let (object_weights, env_weights) = rank_group_objects(&self.samples[g.first..=g.last]);
                FocusFrameGroup {
                    start_ms: g.start_ms,
                    end_ms: g.end_ms,
                    stay_duration_s: g.duration_ms() as f64 / 1000.0,
                    avg_forward: g.avg_forward,
                    speak_words: focus::spoken_text(ws),
                    object_weights,
                    env_weights,
                }
            })
            .collect()
    }

    /// Freezes the accumulated inputs. Words and cues are cleared either
    /// way; head samples after the last word are kept for the next request.
    pub fn finalize(&mut self, scene: &Scene, display_text: Option<&str>, mode: TaskMode, debug: bool) -> Finalized {
        let mut words = std::mem::take(&mut self.words);
        words.sort_by_key(|w| w.start_ms);
        let points = std::mem::take(&mut self.points);
        let lines = std::mem::take(&mut self.lines);
        let serialized = serialize_time(&words, &points, &lines);
        let result = if !self.filter.should_send(&serialized.plain) {
            Finalized::Filtered {
                transcript: serialized.plain,
            }
        } else {
            let groups = self.focus_groups(&words);
            let player = self
                .latest_pose
                .as_ref()
                .map(|p| crate::scene::PlayerPose {
                    position: p.position,
                    forward: p.forward,
                    right: p.right,
                })
                .unwrap_or(scene.player);
            Finalized::Payload(Box::new(build_user_prompt(
                &player,
                scene,
                &groups,
                &points,
                &lines,
                &serialized,
                display_text,
                mode,
                debug,
            )))
        };
        if let Some(last) = words.last() {
            let cutoff = last.end_ms;
            self.samples.retain(|s| s.sample.t_ms > cutoff);
        }
        result
    }

    /// Drops words and cues without producing a request.
    pub fn reset_utterance(&mut self) {
        self.words.clear();
        self.points.clear();
        self.lines.clear();
    }
}
