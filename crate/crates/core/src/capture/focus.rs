//! Focus-frame grouping of head motion and in-frustum ranking.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{CaptureSettings, HeadSample, TimedWord};
use crate::geometry::{in_frustum, Vec3};
use crate::scene::Scene;

/// Head sample together with the visibility scores computed against the
/// scene as it was when the sample arrived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSample {
    pub sample: HeadSample,
    pub objects: Vec<(String, u64)>,
    pub environment: Vec<(String, u64)>,
}

/// Contiguous run of samples before ranking and speech assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct RawGroup {
    pub start_ms: u64,
    pub end_ms: u64,
    /// Index range into the sample slice.
    pub first: usize,
    pub last: usize,
    pub avg_forward: Vec3,
}

impl RawGroup {
    pub fn duration_ms(&self) -> u64 {
        self.end_ms - self.start_ms
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FocusFrameGroup {
    pub start_ms: u64,
    pub end_ms: u64,
    pub stay_duration_s: f64,
    pub avg_forward: Vec3,
    pub speak_words: String,
    pub object_weights: Vec<(String, u64)>,
    pub env_weights: Vec<(String, u64)>,
}

/// Greedy segmentation of a head-pose stream.
///
/// A group grows while each new sample's forward stays within
/// `angular_threshold_deg` of the group's running mean forward. A group
/// ends at the first sample of the next group (or at its own last sample
/// when the stream ends). Groups shorter than `min_duration_ms` are dropped.
pub fn group_focus_frames(samples: &[HeadSample], angular_threshold_deg: f64, min_duration_ms: u64) -> Vec<RawGroup> {
    let mut spans: Vec<(usize, usize, Vec3)> = Vec::new();
    let mut start = 0usize;
    let mut sum = Vec3::ZERO;
    for (i, s) in samples.iter().enumerate() {
        if i > start {
            let mean = sum.normalized().unwrap_or(s.forward);
            if mean.angle_deg(s.forward) > angular_threshold_deg {
                spans.push((start, i - 1, sum));
                start = i;
                sum = Vec3::ZERO;
            }
        }
        sum += s.forward;
    }
    if !samples.is_empty() {
        spans.push((start, samples.len() - 1, sum));
    }
    spans
        .iter()
        .enumerate()
        .map(|(k, &(first, last, sum))| {
            let end_ms = match spans.get(k + 1) {
                Some(&(next, _, _)) => samples[next].t_ms,
                None => samples[last].t_ms,
            };
            RawGroup {
                start_ms: samples[first].t_ms,
                end_ms,
                first,
                last,
                avg_forward: sum.normalized().unwrap_or(Vec3::FORWARD),
            }
        })
        .filter(|g| g.duration_ms() >= min_duration_ms)
        .collect()
}

/// Per-sample score for every visible object and environment entry:
/// `round(K · (1 − normalised screen distance))`, floored at zero.
pub fn score_sample(sample: &HeadSample, scene: &Scene, settings: &CaptureSettings) -> ScoredSample {
    let score = |b| {
        let hit = in_frustum(
            b,
            sample.position,
            sample.forward,
            sample.right,
            settings.fov_h_deg,
            settings.fov_v_deg,
        );
        hit.visible.then(|| {
            (settings.score_scale * (1.0 - hit.screen_center_distance))
                .round()
                .max(0.0) as u64
        })
    };
    ScoredSample {
        sample: sample.clone(),
        objects: scene
            .objects()
            .iter()
            .filter_map(|o| score(&o.boundary).map(|w| (o.object_id.clone(), w)))
            .collect(),
        environment: scene
            .environment()
            .iter()
            .filter_map(|e| score(&e.boundary).map(|w| (e.name.clone(), w)))
            .collect(),
    }
}

/// Name → summed weight, heaviest first.
pub type Weights = Vec<(String, u64)>;

/// Sums the per-sample scores of a group (objects, environment); sorted by
/// weight descending with ties kept in first-seen order.
pub fn rank_group_objects(samples: &[ScoredSample]) -> (Weights, Weights) {
    fn sum<'a>(lists: impl Iterator<Item = &'a Weights>) -> Weights {
        let mut order: Weights = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        for list in lists {
            for (name, w) in list {
                match index.get(name) {
                    Some(&i) => order[i].1 += w,
                    None => {
                        index.insert(name.clone(), order.len());
                        order.push((name.clone(), *w));
                    }
                }
            }
        }
        // Stable sort keeps first-seen order among equal weights.
        order.sort_by_key(|e| std::cmp::Reverse(e.1));
        order
    }
    (
        sum(samples.iter().map(|s| &s.objects)),
        sum(samples.iter().map(|s| &s.environment)),
    )
}

/// Assigns each word to the group whose `[start_ms, end_ms)` holds its start
/// (the last group also holds its end instant); other words go to the
/// group nearest in time. Returns the words per group.
pub fn segment_speech<'a>(words: &'a [TimedWord], groups: &[(u64, u64)]) -> Vec<Vec<&'a TimedWord>> {
    let mut out: Vec<Vec<&TimedWord>> = vec![Vec::new(); groups.len()];
    if groups.is_empty() {
        return out;
    }
    let last = groups.len() - 1;
    for w in words {
        let t = w.start_ms;
        let inside = groups
            .iter()
            .position(|&(s, e)| s <= t && t < e)
            .or_else(|| (groups[last].0 <= t && t <= groups[last].1).then_some(last));
        let idx = inside.unwrap_or_else(|| {
            groups
                .iter()
                .enumerate()
                .min_by_key(|(_, &(s, e))| if t < s { s - t } else { t.saturating_sub(e) })
                .map(|(i, _)| i)
                .unwrap_or(0)
        });
        out[idx].push(w);
    }
    out
}

/// Words rendered the way transcripts are sent: each followed by a space.
pub fn spoken_text<'a>(words: impl IntoIterator<Item = &'a TimedWord>) -> String {
    words.into_iter().map(|w| format!("{} ", w.text)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(t_ms: u64, yaw_deg: f64) -> HeadSample {
        let r = yaw_deg.to_radians();
        HeadSample {
            t_ms,
            position: Vec3::ZERO,
            forward: Vec3::new(r.sin(), 0.0, r.cos()),
            right: Vec3::new(r.cos(), 0.0, -r.sin()),
        }
    }

    fn stream(spans: &[(u64, u64, f64)]) -> Vec<HeadSample> {
        // 10 Hz sampling; each span is [from, to) except the final one,
        // which includes its end instant.
        let mut out = Vec::new();
        for (k, &(from, to, yaw)) in spans.iter().enumerate() {
            let mut t = from;
            while t < to || (k == spans.len() - 1 && t == to) {
                out.push(sample(t, yaw));
                t += 100;
            }
        }
        out
    }

    /// Independent replay of the greedy rule on (t, yaw) pairs for streams
    /// whose headings are piecewise constant.
    fn oracle(spans: &[(u64, u64, f64)], threshold: f64, min_ms: u64) -> Vec<(u64, u64)> {
        let mut runs: Vec<(u64, u64, f64)> = Vec::new();
        for &(from, to, yaw) in spans {
            match runs.last_mut() {
                Some(last) if (last.2 - yaw).abs() <= threshold => last.1 = to,
                _ => runs.push((from, to, yaw)),
            }
        }
        runs.iter()
            .map(|&(s, e, _)| (s, e))
            .filter(|(s, e)| e - s >= min_ms)
            .collect()
    }

    #[test]
    fn constant_heading_is_one_group() {
        let spans = [(0, 12_000, 0.0)];
        let groups = group_focus_frames(&stream(&spans), 10.0, 1000);
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].duration_ms(), 12_000);
    }

    #[test]
    fn abrupt_turn_splits_in_two() {
        let spans = [(0, 5_000, 0.0), (5_000, 10_000, 90.0)];
        let got: Vec<_> = group_focus_frames(&stream(&spans), 10.0, 1000)
            .iter()
            .map(|g| (g.start_ms, g.end_ms))
            .collect();
        assert_eq!(got, oracle(&spans, 10.0, 1000));
        assert_eq!(got, vec![(0, 5_000), (5_000, 10_000)]);
    }

    #[test]
    fn short_glance_is_dropped() {
        let spans = [(0, 5_000, 0.0), (5_000, 5_200, 60.0), (5_200, 10_000, 0.0)];
        let got: Vec<_> = group_focus_frames(&stream(&spans), 10.0, 1000)
            .iter()
            .map(|g| (g.start_ms, g.end_ms))
            .collect();
        assert_eq!(got, oracle(&spans, 10.0, 1000));
        assert_eq!(got.len(), 2);
    }

    #[test]
    fn empty_stream_has_no_groups() {
        assert!(group_focus_frames(&[], 15.0, 1000).is_empty());
    }

    #[test]
    fn ranking_sums_and_sorts_with_stable_ties() {
        let mk = |objs: &[(&str, u64)]| ScoredSample {
            sample: sample(0, 0.0),
            objects: objs.iter().map(|(n, w)| (n.to_string(), *w)).collect(),
            environment: vec![],
        };
        let samples = vec![mk(&[("a", 3), ("b", 5)]), mk(&[("c", 8), ("a", 5)])];
        let (objs, env) = rank_group_objects(&samples);
        assert_eq!(
            objs,
            vec![("a".to_string(), 8), ("c".to_string(), 8), ("b".to_string(), 5)]
        );
        assert!(env.is_empty());
    }

    #[test]
    fn words_follow_group_spans() {
        let w = |text: &str, s: u64| TimedWord {
            text: text.into(),
            start_ms: s,
            end_ms: s + 200,
        };
        let words = vec![w("early", 0), w("a", 1_500), w("straddle", 2_900), w("late", 9_000)];
        let parts = segment_speech(&words, &[(1_000, 3_000), (3_000, 5_000)]);
        let texts: Vec<String> = parts.iter().map(|p| spoken_text(p.iter().copied())).collect();
        assert_eq!(texts, vec!["early a straddle ".to_string(), "late ".to_string()]);
        assert!(segment_speech(&[], &[(0, 1)])[0].is_empty());
    }
}
