//! Task-1 measures: coarse/fine attainment, hand travel, first-action latency.

use serde::{Deserialize, Serialize};

use crate::geometry::{avg_corner_distance, OrientedBox, Vec3};

pub const COARSE_THRESHOLD_M: f64 = 0.30;
pub const FINE_THRESHOLD_M: f64 = 0.12;
/// Keeps the strict comparison robust to float noise at the threshold.
const STRICT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetStatus {
    None,
    Coarse,
    Fine,
}

pub fn status_for_distance(d: f64) -> TargetStatus {
    if d < FINE_THRESHOLD_M - STRICT_EPS {
        TargetStatus::Fine
    } else if d < COARSE_THRESHOLD_M - STRICT_EPS {
        TargetStatus::Coarse
    } else {
        TargetStatus::None
    }
}

/// Compares an object's box with its goal by mean corner distance.
pub fn check_target(boundary: &OrientedBox, goal: &OrientedBox) -> TargetStatus {
    status_for_distance(avg_corner_distance(boundary, goal))
}

/// Polyline length of one hand's samples.
pub fn accumulate_hand_distance(samples: &[Vec3]) -> f64 {
    samples.windows(2).map(|w| w[0].distance(w[1])).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hand {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetMetrics {
    pub object_id: String,
    pub status: TargetStatus,
    /// Absent while the bound object does not exist.
    pub distance_m: Option<f64>,
    pub coarse_time_s: Option<f64>,
    pub fine_time_s: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskMetrics {
    pub targets: Vec<TargetMetrics>,
    /// When every target had reached coarse (first attainment).
    pub coarse_time_s: Option<f64>,
    /// When every target had reached fine (first attainment).
    pub fine_time_s: Option<f64>,
    pub hand_movement_m: f64,
    pub first_action_latency_s: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Tracked {
    object_id: String,
    goal: OrientedBox,
}

/// Accumulates metrics over a session.
#[derive(Debug, Clone, Default)]
pub struct MetricsTracker {
    tracked: Vec<Tracked>,
    metrics: TaskMetrics,
    last_hand: [Option<Vec3>; 2],
}

impl MetricsTracker {
    pub fn new(bindings: Vec<(String, OrientedBox)>) -> Self {
        let metrics = TaskMetrics {
            targets: bindings
                .iter()
                .map(|(id, _)| TargetMetrics {
                    object_id: id.clone(),
                    status: TargetStatus::None,
                    distance_m: None,
                    coarse_time_s: None,
                    fine_time_s: None,
                })
                .collect(),
            ..Default::default()
        };
        Self {
            tracked: bindings
                .into_iter()
                .map(|(object_id, goal)| Tracked { object_id, goal })
                .collect(),
            metrics,
            last_hand: [None, None],
        }
    }

    pub fn metrics(&self) -> &TaskMetrics {
        &self.metrics
    }

    pub fn goals(&self) -> impl Iterator<Item = (&str, &OrientedBox)> {
        self.tracked.iter().map(|t| (t.object_id.as_str(), &t.goal))
    }

    fn all_fine(&self) -> bool {
        !self.tracked.is_empty() && self.metrics.fine_time_s.is_some()
    }

    /// Re-evaluates targets against current boxes (`None` when deleted).
    /// Returns true if any status changed.
    pub fn evaluate<'a>(&mut self, t_ms: u64, lookup: impl Fn(&str) -> Option<&'a OrientedBox>) -> bool {
        let t = t_ms as f64 / 1000.0;
        let mut changed = false;
        for (tr, m) in self.tracked.iter().zip(self.metrics.targets.iter_mut()) {
            let d = lookup(&tr.object_id).map(|b| avg_corner_distance(b, &tr.goal));
            let status = d.map_or(TargetStatus::None, status_for_distance);
            changed |= status != m.status;
            m.status = status;
            m.distance_m = d;
            if status >= TargetStatus::Coarse && m.coarse_time_s.is_none() {
                m.coarse_time_s = Some(t);
            }
            if status == TargetStatus::Fine && m.fine_time_s.is_none() {
                m.fine_time_s = Some(t);
            }
        }
        let targets = &self.metrics.targets;
        if !targets.is_empty() {
            if self.metrics.coarse_time_s.is_none() && targets.iter().all(|m| m.coarse_time_s.is_some()) {
                self.metrics.coarse_time_s = targets.iter().filter_map(|m| m.coarse_time_s).reduce(f64::max);
            }
            if self.metrics.fine_time_s.is_none() && targets.iter().all(|m| m.fine_time_s.is_some()) {
                self.metrics.fine_time_s = targets.iter().filter_map(|m| m.fine_time_s).reduce(f64::max);
            }
        }
        changed
    }

    /// Adds one hand sample; travel stops counting once all targets are fine.
    pub fn hand_sample(&mut self, hand: Hand, position: Vec3) {
        let frozen = self.all_fine();
        let slot = &mut self.last_hand[hand as usize];
        if let Some(prev) = slot.replace(position) {
            if !frozen {
                self.metrics.hand_movement_m += prev.distance(position);
            }
        }
    }

    pub fn record_latency(&mut self, seconds: f64) {
        self.metrics.first_action_latency_s.push(seconds);
    }
}
