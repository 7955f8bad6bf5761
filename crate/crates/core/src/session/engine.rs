//! The synchronous session core. Everything the live loop and replay do goes
//! through these methods, so a trace fully determines the outcome.

use std::collections::VecDeque;
use std::io::Write;

use crate::capture::{CaptureAccumulator, Finalized, HeadSample, InterjectionFilter, TimedWord};
use crate::gateway::{one_shot_pair, render_system_prompt, system_template, ChatMessage, ContextWindow};
use crate::runtime::{executed_lines, CommandRuntime, ExecutionOutcome, OutcomeStatus, SceneChange, SkipReason};
use crate::scene::{object_spec, Scene, SceneFile};
use crate::voice::{self, SelectionState};

use super::metrics::MetricsTracker;
use super::trace::{OutcomeEntry, TraceHeader, TraceRecord, TRACE_VERSION};
use super::{
    IngestEvent, InteractionMode, RevisionEvent, SessionConfig, SessionError, SessionEvent, Source, TaskMetrics,
    WarningKind,
};

/// Size mismatch tolerated between a goal box and its bound object.
const GOAL_SIZE_TOLERANCE: f64 = 1e-3;

/// A model request the caller should send.
#[derive(Debug, Clone, PartialEq)]
pub struct PendingRequest {
    pub request_id: u64,
    pub t_ms: u64,
    pub messages: Vec<ChatMessage>,
}

/// Result of feeding one input.
#[derive(Debug, Default)]
pub struct Step {
    pub events: Vec<SessionEvent>,
    pub request: Option<PendingRequest>,
}

#[derive(Debug)]
struct ActiveRequest {
    id: u64,
    sent_ms: u64,
    user: String,
    outcomes: Vec<ExecutionOutcome>,
    first_applied_ms: Option<u64>,
}

pub struct Session {
    config: SessionConfig,
    scene: Scene,
    capture: CaptureAccumulator,
    runtime: CommandRuntime,
    /// Direct manipulation must not move the model's `crt` alias.
    control_runtime: CommandRuntime,
    context: ContextWindow,
    selection: SelectionState,
    metrics: MetricsTracker,
    filter: InterjectionFilter,
    active: Option<ActiveRequest>,
    queued: VecDeque<String>,
    next_request_id: u64,
    clock_ms: u64,
    records: Vec<TraceRecord>,
    sink: Option<Box<dyn Write + Send>>,
    closed: bool,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("config", &self.config)
            .field("revision", &self.scene.revision())
            .field("records", &self.records.len())
            .finish_non_exhaustive()
    }
}

impl Session {
    pub fn new(config: SessionConfig, file: &SceneFile) -> Result<Self, SessionError> {
        let scene = Scene::from_file(file).map_err(|e| SessionError::SceneLoad(e.to_string()))?;
        let metrics = MetricsTracker::new(bind_targets(file, &scene)?);
        let task_mode = config.task.task_mode();
        let system = render_system_prompt(system_template(task_mode), &scene)
            .map_err(|e| SessionError::Config(e.to_string()))?;
        let (shot_user, shot_assistant) = one_shot_pair();
        let mut context = ContextWindow::with_shot(system, shot_user, shot_assistant);
        context.max_chars = config.history_chars;
        let header = TraceRecord::Header(TraceHeader {
            version: TRACE_VERSION,
            config: config.clone(),
            scene: file.clone(),
        });
        Ok(Self {
            capture: CaptureAccumulator::new(config.capture.clone()),
            runtime: CommandRuntime::new(task_mode),
            control_runtime: CommandRuntime::new(crate::capture::TaskMode::Task2),
            context,
            selection: SelectionState::default(),
            metrics,
            filter: InterjectionFilter::default(),
            active: None,
            queued: VecDeque::new(),
            next_request_id: 1,
            clock_ms: 0,
            records: vec![header],
            sink: None,
            closed: false,
            scene,
            config,
        })
    }

    /// Streams every trace record (including those already written) to `sink`.
    pub fn record_to(&mut self, mut sink: Box<dyn Write + Send>) -> std::io::Result<()> {
        for r in &self.records {
            writeln!(sink, "{}", r.to_json())?;
        }
        sink.flush()?;
        self.sink = Some(sink);
        Ok(())
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn metrics(&self) -> &TaskMetrics {
        self.metrics.metrics()
    }

    pub fn context(&self) -> &ContextWindow {
        &self.context
    }

    pub fn selection(&self) -> &SelectionState {
        &self.selection
    }

    pub fn is_busy(&self) -> bool {
        self.active.is_some()
    }

    pub fn active_request(&self) -> Option<u64> {
        self.active.as_ref().map(|a| a.id)
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn trace_jsonl(&self) -> String {
        self.records.iter().map(|r| r.to_json() + "\n").collect()
    }

    /// Outcome records only, as JSONL.
    pub fn outcome_log(&self) -> String {
        self.records
            .iter()
            .filter_map(|r| match r {
                TraceRecord::Outcome(o) => Some(serde_json::to_string(&o.record).expect("outcome serializes") + "\n"),
                _ => None,
            })
            .collect()
    }

    fn record(&mut self, r: TraceRecord) {
        if let Some(sink) = &mut self.sink {
            let res = writeln!(sink, "{}", r.to_json()).and_then(|_| sink.flush());
            if let Err(e) = res {
                tracing::warn!("trace sink failed, recording in memory only: {e}");
                self.sink = None;
            }
        }
        self.records.push(r);
    }

    pub fn ingest(&mut self, ev: IngestEvent) -> Step {
        let mut step = Step::default();
        if self.closed {
            return step;
        }
        self.record(TraceRecord::Ingest(ev.clone()));
        let t = ev.t_ms();
        self.clock_ms = self.clock_ms.max(t);
        match ev {
            IngestEvent::Word { text, start_ms, end_ms } => {
                self.capture.push_word(TimedWord { text, start_ms, end_ms });
            }
            IngestEvent::Pose {
                t_ms,
                position,
                forward,
                right,
            } => {
                let sample = HeadSample {
                    t_ms,
                    position,
                    forward,
                    right,
                };
                self.capture.push_pose(sample, &self.scene);
            }
            IngestEvent::Point { t_ms, target } => {
                let hit = target.resolve(&self.scene);
                match self.capture.push_point(hit, t_ms) {
                    Ok(cue) => {
                        step.events.push(SessionEvent::Cue {
                            t_ms,
                            cue_id: cue.hit_id.clone(),
                            position: cue.position,
                        });
                        self.selection.last_point = Some(cue.clone());
                    }
                    Err(e) => step.events.push(warning(t_ms, WarningKind::NoHit, e.to_string())),
                }
            }
            IngestEvent::Line {
                start_ms,
                duration_ms,
                start,
                end_position,
                release,
            } => match start.resolve(&self.scene) {
                Some(hit) => {
                    let release = release.and_then(|r| r.resolve(&self.scene));
                    let cue = self
                        .capture
                        .push_line(hit, end_position, release, start_ms, duration_ms);
                    step.events.push(SessionEvent::Cue {
                        t_ms: t,
                        cue_id: cue.line_id.clone(),
                        position: cue.start.position,
                    });
                }
                None => step
                    .events
                    .push(warning(t, WarningKind::NoHit, "line start hit nothing".into())),
            },
            IngestEvent::Finalize { t_ms, display_text } => self.finalize(t_ms, display_text, &mut step),
            IngestEvent::Select { t_ms, object_ids } => {
                let (known, unknown): (Vec<_>, Vec<_>) =
                    object_ids.into_iter().partition(|id| self.scene.object(id).is_some());
                if !unknown.is_empty() {
                    step.events
                        .push(warning(t_ms, WarningKind::UnknownObject, unknown.join(", ")));
                }
                self.selection.selected = known;
            }
            IngestEvent::Hand { hand, position, .. } => self.metrics.hand_sample(hand, position),
            IngestEvent::Manipulate {
                t_ms,
                object_id,
                position,
                forward,
                scale,
            } => {
                if self.scene.object(&object_id).is_none() {
                    step.events.push(warning(t_ms, WarningKind::UnknownObject, object_id));
                    return step;
                }
                let id = quote(&object_id);
                let mut lines = Vec::new();
                if let Some(p) = position {
                    lines.push(format!("MOVE({id}, {}, {}, {});", p.x, p.y, p.z));
                }
                if let Some(f) = forward {
                    lines.push(format!("FORWARD({id}, {}, {}, {});", f.x, f.y, f.z));
                }
                if let Some(s) = scale {
                    lines.push(format!("SCALE({id}, {}, {}, {});", s.x, s.y, s.z));
                }
                for line in lines {
                    let out = self.control_runtime.execute_line(&mut self.scene, &line);
                    self.handle_outcome(out, Source::Control, None, t_ms, &mut step.events);
                }
            }
        }
        step
    }

    fn finalize(&mut self, t_ms: u64, display_text: Option<String>, step: &mut Step) {
        match self.config.mode {
            InteractionMode::Control => {
                let heard = self.capture.transcript();
                self.capture.reset_utterance();
                if !heard.is_empty() {
                    step.events.push(warning(t_ms, WarningKind::SpeechIgnored, heard));
                }
            }
            InteractionMode::Voice => {
                let heard = display_text.unwrap_or_else(|| self.capture.transcript());
                self.capture.reset_utterance();
                if !self.filter.should_send(&heard) {
                    step.events.push(warning(t_ms, WarningKind::Filtered, heard));
                    return;
                }
                let tokens = voice::normalize(&heard);
                self.selection.prune(&self.scene);
                match voice::parse_command(&tokens, &self.scene, &self.selection) {
                    Err(nm) => step
                        .events
                        .push(warning(t_ms, WarningKind::NoMatch, nm.slot().to_string())),
                    Ok(cmd) => {
                        let outs =
                            voice::apply_command_with(&cmd, &mut self.scene, &mut self.selection, &mut self.runtime);
                        for out in outs {
                            self.handle_outcome(out, Source::Voice, None, t_ms, &mut step.events);
                        }
                    }
                }
            }
            InteractionMode::Mover => {
                let frozen = self.capture.finalize(
                    &self.scene,
                    display_text.as_deref(),
                    self.config.task.task_mode(),
                    self.config.debug,
                );
                match frozen {
                    Finalized::Filtered { transcript } => {
                        step.events.push(warning(t_ms, WarningKind::Filtered, transcript))
                    }
                    Finalized::Payload(p) => {
                        let user = p.to_json();
                        if self.active.is_some() {
                            self.queued.push_back(user);
                        } else {
                            step.request = Some(self.start_request(user, t_ms));
                        }
                    }
                }
            }
        }
    }

    fn start_request(&mut self, user: String, t_ms: u64) -> PendingRequest {
        let request_id = self.next_request_id;
        self.next_request_id += 1;
        let messages = self.context.request(&user);
        self.record(TraceRecord::Request {
            request_id,
            t_ms,
            user: user.clone(),
        });
        self.active = Some(ActiveRequest {
            id: request_id,
            sent_ms: t_ms,
            user,
            outcomes: Vec::new(),
            first_applied_ms: None,
        });
        PendingRequest {
            request_id,
            t_ms,
            messages,
        }
    }

    /// Executes one streamed response line. Lines for a request that is not
    /// active are ignored.
    pub fn response_line(&mut self, request_id: u64, offset_ms: u64, text: &str) -> Vec<SessionEvent> {
        let mut events = Vec::new();
        let Some(sent_ms) = self.active.as_ref().filter(|a| a.id == request_id).map(|a| a.sent_ms) else {
            return events;
        };
        if self.closed {
            return events;
        }
        self.record(TraceRecord::ResponseLine {
            request_id,
            offset_ms,
            text: text.to_string(),
        });
        let t = sent_ms + offset_ms;
        self.clock_ms = self.clock_ms.max(t);
        let out = self.runtime.execute_line(&mut self.scene, text);
        let active = self.active.as_mut().expect("checked above");
        if out.is_applied() && active.first_applied_ms.is_none() {
            active.first_applied_ms = Some(offset_ms);
        }
        active.outcomes.push(out.clone());
        self.handle_outcome(out, Source::Llm, Some(request_id), t, &mut events);
        events
    }

    /// Closes the active request, commits the exchange to history and starts
    /// the next queued request, if any.
    pub fn end_request(&mut self, request_id: u64, offset_ms: u64, error: Option<String>) -> Step {
        let mut step = Step::default();
        if self.closed || self.active.as_ref().is_none_or(|a| a.id != request_id) {
            return step;
        }
        self.record(TraceRecord::StreamEnd {
            request_id,
            offset_ms,
            error: error.clone(),
        });
        let active = self.active.take().expect("checked above");
        let t = active.sent_ms + offset_ms;
        self.clock_ms = self.clock_ms.max(t);
        // A request that failed before any line arrived leaves no exchange.
        if error.is_none() || !active.outcomes.is_empty() {
            self.context
                .commit_exchange(&active.user, &executed_lines(&active.outcomes));
        }
        if let Some(first) = active.first_applied_ms {
            self.metrics.record_latency(first as f64 / 1000.0);
        }
        if let Some(e) = &error {
            step.events.push(warning(t, WarningKind::Provider, e.clone()));
        }
        step.events.push(SessionEvent::StreamEnd {
            request_id,
            t_ms: t,
            lines: active.outcomes.len(),
            applied: active.outcomes.iter().filter(|o| o.is_applied()).count(),
            error,
        });
        step.events.push(SessionEvent::Metrics {
            t_ms: t,
            metrics: self.metrics.metrics().clone(),
        });
        if let Some(user) = self.queued.pop_front() {
            step.request = Some(self.start_request(user, t));
        }
        step
    }

    /// Marks the end of the session in the trace. Later inputs are ignored.
    pub fn close(&mut self) {
        if self.closed {
            return;
        }
        self.record(TraceRecord::End {
            t_ms: self.clock_ms,
            revision: self.scene.revision(),
        });
        self.closed = true;
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    fn handle_outcome(
        &mut self,
        out: ExecutionOutcome,
        source: Source,
        request_id: Option<u64>,
        t_ms: u64,
        events: &mut Vec<SessionEvent>,
    ) {
        self.record(TraceRecord::Outcome(OutcomeEntry {
            t_ms,
            source,
            request_id,
            record: out.record(),
        }));
        match &out.status {
            OutcomeStatus::Applied => {
                if let (Some(revision), Some(change)) = (out.revision, out.change.clone()) {
                    let object = match &change {
                        SceneChange::Upsert(id) => self.scene.object(id).map(object_spec),
                        SceneChange::Removed(_) => None,
                    };
                    events.push(SessionEvent::Revision(RevisionEvent {
                        revision,
                        t_ms,
                        source,
                        line: out.line.clone(),
                        change,
                        object,
                    }));
                }
                let scene = &self.scene;
                if self.metrics.evaluate(t_ms, |id| scene.object(id).map(|o| &o.boundary)) {
                    events.push(SessionEvent::Metrics {
                        t_ms,
                        metrics: self.metrics.metrics().clone(),
                    });
                }
            }
            OutcomeStatus::Message(m) => events.push(SessionEvent::Message {
                t_ms,
                text: m.clone(),
                debug: false,
            }),
            OutcomeStatus::Debug(m) => events.push(SessionEvent::Message {
                t_ms,
                text: m.clone(),
                debug: true,
            }),
            OutcomeStatus::Skipped(SkipReason::Comment) => {}
            OutcomeStatus::Skipped(r) => events.push(warning(t_ms, WarningKind::Skipped, format!("{}: {r}", out.line))),
        }
    }
}

fn warning(t_ms: u64, kind: WarningKind, detail: String) -> SessionEvent {
    SessionEvent::Warning { t_ms, kind, detail }
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Resolves each target to the `index`-th instance of its prefab.
fn bind_targets(file: &SceneFile, scene: &Scene) -> Result<Vec<(String, crate::geometry::OrientedBox)>, SessionError> {
    file.targets
        .iter()
        .map(|t| {
            let obj = scene
                .objects()
                .iter()
                .filter(|o| o.prefab_id == t.prefab_id)
                .nth(t.index)
                .ok_or_else(|| {
                    SessionError::SceneLoad(format!(
                        "target binds {}[{}], which does not exist",
                        t.prefab_id, t.index
                    ))
                })?;
            let goal = t.goal.to_box().map_err(|e| SessionError::SceneLoad(e.to_string()))?;
            let ds = goal.size - obj.boundary.size;
            if ds.x.abs().max(ds.y.abs()).max(ds.z.abs()) > GOAL_SIZE_TOLERANCE {
                return Err(SessionError::SceneLoad(format!(
                    "goal size for {}[{}] differs from the object's boundary",
                    t.prefab_id, t.index
                )));
            }
            Ok((obj.object_id.clone(), goal))
        })
        .collect()
}
