//! JSONL session traces and deterministic replay.
//!
//! A trace is a header, then every input in the order the session saw it
//! (capture events, response lines, stream ends) interleaved with the derived
//! records (requests, outcomes) and a closing `end` record. Replay feeds the
//! inputs back through [`Session`] and requires the derived records to come out
//! byte-identical.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::runtime::OutcomeRecord;
use crate::scene::SceneFile;

use super::engine::Session;
use super::{IngestEvent, SessionConfig, Source};

pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub version: u32,
    pub config: SessionConfig,
    pub scene: SceneFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeEntry {
    pub t_ms: u64,
    pub source: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_id: Option<u64>,
    #[serde(flatten)]
    pub record: OutcomeRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceRecord {
    Header(TraceHeader),
    Ingest(IngestEvent),
    Request {
        request_id: u64,
        t_ms: u64,
        user: String,
    },
    ResponseLine {
        request_id: u64,
        offset_ms: u64,
        text: String,
    },
    StreamEnd {
        request_id: u64,
        offset_ms: u64,
        error: Option<String>,
    },
    Outcome(OutcomeEntry),
    End {
        t_ms: u64,
        revision: u64,
    },
}

/// Non-ingest records, tagged like the ingest ones.
#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Meta {
    Header(TraceHeader),
    Request {
        request_id: u64,
        t_ms: u64,
        user: String,
    },
    ResponseLine {
        request_id: u64,
        offset_ms: u64,
        text: String,
    },
    StreamEnd {
        request_id: u64,
        offset_ms: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        error: Option<String>,
    },
    Outcome(OutcomeEntry),
    End {
        t_ms: u64,
        revision: u64,
    },
}

impl TraceRecord {
    pub fn to_json(&self) -> String {
        let meta = match self.clone() {
            TraceRecord::Ingest(ev) => return serde_json::to_string(&ev).expect("ingest serializes"),
            TraceRecord::Header(h) => Meta::Header(h),
            TraceRecord::Request { request_id, t_ms, user } => Meta::Request { request_id, t_ms, user },
            TraceRecord::ResponseLine {
                request_id,
                offset_ms,
                text,
            } => Meta::ResponseLine {
                request_id,
                offset_ms,
                text,
            },
            TraceRecord::StreamEnd {
                request_id,
                offset_ms,
                error,
            } => Meta::StreamEnd {
                request_id,
                offset_ms,
                error,
            },
            TraceRecord::Outcome(o) => Meta::Outcome(o),
            TraceRecord::End { t_ms, revision } => Meta::End { t_ms, revision },
        };
        serde_json::to_string(&meta).expect("trace record serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let v: Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let kind = v.get("type").and_then(Value::as_str).ok_or("record has no type")?;
        if IngestEvent::KINDS.contains(&kind) {
            return serde_json::from_value(v)
                .map(TraceRecord::Ingest)
                .map_err(|e| e.to_string());
        }
        let meta: Meta = serde_json::from_value(v).map_err(|e| e.to_string())?;
        Ok(match meta {
            Meta::Header(h) => TraceRecord::Header(h),
            Meta::Request { request_id, t_ms, user } => TraceRecord::Request { request_id, t_ms, user },
            Meta::ResponseLine {
                request_id,
                offset_ms,
                text,
            } => TraceRecord::ResponseLine {
                request_id,
                offset_ms,
                text,
            },
            Meta::StreamEnd {
                request_id,
                offset_ms,
                error,
            } => TraceRecord::StreamEnd {
                request_id,
                offset_ms,
                error,
            },
            Meta::Outcome(o) => TraceRecord::Outcome(o),
            Meta::End { t_ms, revision } => TraceRecord::End { t_ms, revision },
        })
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TraceError {
    #[error("trace line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error("replay diverged at trace line {line}: expected {expected}, got {actual}")]
    Divergence {
        line: usize,
        expected: String,
        actual: String,
    },
}

fn format_err(line: usize, reason: impl Into<String>) -> TraceError {
    TraceError::Format {
        line,
        reason: reason.into(),
    }
}

/// A replayed session, closed.
#[derive(Debug)]
pub struct Replay {
    pub session: Session,
}

/// Parses a trace and replays it. Line numbers in errors are 1-based.
pub fn replay_trace(text: &str) -> Result<Replay, TraceError> {
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r = TraceRecord::from_json(line).map_err(|e| format_err(i + 1, e))?;
        records.push((i + 1, r));
    }
    let Some((_, TraceRecord::Header(header))) = records.first() else {
        return Err(format_err(1, "trace does not start with a header"));
    };
    if header.version != TRACE_VERSION {
        return Err(format_err(1, format!("unsupported trace version {}", header.version)));
    }
    let last_line = records.last().map_or(1, |(n, _)| *n);
    if !matches!(records.last(), Some((_, TraceRecord::End { .. }))) {
        return Err(format_err(last_line, "trace is truncated (no end record)"));
    }
    let mut session = Session::new(header.config.clone(), &header.scene).map_err(|e| format_err(1, e.to_string()))?;
    for (n, r) in &records[1..] {
        match r {
            TraceRecord::Header(_) => return Err(format_err(*n, "unexpected second header")),
            TraceRecord::Ingest(ev) => {
                session.ingest(ev.clone());
            }
            TraceRecord::ResponseLine {
                request_id,
                offset_ms,
                text,
            } => {
                session.response_line(*request_id, *offset_ms, text);
            }
            TraceRecord::StreamEnd {
                request_id,
                offset_ms,
                error,
            } => {
                session.end_request(*request_id, *offset_ms, error.clone());
            }
            TraceRecord::End { .. } => session.close(),
            TraceRecord::Request { .. } | TraceRecord::Outcome(_) => {}
        }
    }
    let produced = session.records();
    for (k, (n, expected)) in records.iter().enumerate() {
        let actual = produced.get(k).map(TraceRecord::to_json);
        let expected = expected.to_json();
        if actual.as_ref() != Some(&expected) {
            return Err(TraceError::Divergence {
                line: *n,
                expected,
                actual: actual.unwrap_or_else(|| "<nothing>".to_string()),
            });
        }
    }
    if produced.len() > records.len() {
        return Err(TraceError::Divergence {
            line: last_line,
            expected: "<end of trace>".into(),
            actual: produced[records.len()].to_json(),
        });
    }
    Ok(Replay { session })
}
