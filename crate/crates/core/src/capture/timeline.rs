//! Inserts gesture markers into the transcript by timestamp.

use super::{LineCue, PointCue, TimedWord};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SerializedRequest {
    /// Words only, each followed by one space.
    pub plain: String,
    /// Words plus `[<h0>]`, `[<d0>start]`, `[<d0>end]` markers.
    pub annotated: String,
}

/// Time of each inter-word boundary: before the first word, between each
/// adjacent pair (midpoint of the gap), and after the last word.
fn boundaries(words: &[TimedWord]) -> Vec<u64> {
    let mut out = Vec::with_capacity(words.len() + 1);
    if let Some(first) = words.first() {
        out.push(first.start_ms);
    }
    for pair in words.windows(2) {
        out.push((pair[0].end_ms + pair[1].start_ms) / 2);
    }
    if let Some(last) = words.last() {
        out.push(last.end_ms);
    }
    out
}

fn nearest_boundary(bounds: &[u64], words: &[TimedWord], t: u64) -> usize {
    if words.is_empty() {
        return 0;
    }
    if t <= words[0].start_ms {
        return 0;
    }
    if t >= words[words.len() - 1].end_ms {
        return words.len();
    }
    bounds
        .iter()
        .enumerate()
        .min_by_key(|(_, &b)| b.abs_diff(t))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Builds the plain and marker-annotated transcripts.
///
/// Each cue timestamp is placed at the nearest inter-word boundary; cues
/// sharing a boundary keep their time order.
pub fn serialize_time(words: &[TimedWord], points: &[PointCue], lines: &[LineCue]) -> SerializedRequest {
    let bounds = boundaries(words);
    let mut markers: Vec<(usize, u64, usize, String)> = Vec::new();
    let mut seq = 0usize;
    let mut push = |t: u64, label: String, markers: &mut Vec<_>| {
        markers.push((nearest_boundary(&bounds, words, t), t, seq, label));
        seq += 1;
    };
    for p in points {
        push(p.t_ms, format!("[<{}>]", p.hit_id), &mut markers);
    }
    for l in lines {
        push(l.start_ms, format!("[<{}>start]", l.line_id), &mut markers);
        push(
            l.start_ms + l.duration_ms,
            format!("[<{}>end]", l.line_id),
            &mut markers,
        );
    }
    markers.sort_by_key(|m| (m.0, m.1, m.2));

    let mut plain = String::new();
    let mut annotated = String::new();
    let mut pending = markers.iter().peekable();
    for (i, w) in words.iter().enumerate() {
        while let Some(m) = pending.next_if(|m| m.0 == i) {
            annotated.push_str(&m.3);
            annotated.push(' ');
        }
        plain.push_str(&w.text);
        plain.push(' ');
        annotated.push_str(&w.text);
        annotated.push(' ');
    }
    for m in pending {
        annotated.push_str(&m.3);
        annotated.push(' ');
    }
    SerializedRequest { plain, annotated }
}

/// Drops `[<...>]` markers and collapses whitespace.
pub fn strip_markers(annotated: &str) -> String {
    annotated
        .split_whitespace()
        .filter(|tok| !(tok.starts_with("[<") && tok.ends_with(']')))
        .collect::<Vec<_>>()
        .join(" ")
}
