//! Executes parsed calls against the scene with skip-and-continue semantics.

use std::fmt;

use serde::{Serialize, Serializer};

use super::parser::{parse_line, ApiCall, Arg, Axis, Line, ParseError};
use crate::capture::TaskMode;
use crate::geometry::Vec3;
use crate::scene::{Scene, SceneError};

/// Pseudo-id the model uses for the object targeted by the previous call.
pub const CRT: &str = "crt";

/// Why a line was not applied.
#[derive(Debug, Clone, PartialEq)]
pub enum SkipReason {
    Comment,
    Parse(ParseError),
    UnknownFunction(String),
    Disabled(String),
    BadArguments(String),
    AliasUnset,
    UnknownObject(String),
    UnknownPrefab(String),
    ZeroDirection,
    InvalidScale,
    /// Pitch requested for an object that must stay upright.
    UpLocked(String),
}

impl fmt::Display for SkipReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SkipReason::Comment => f.write_str("comment"),
            SkipReason::Parse(e) => write!(f, "{e}"),
            SkipReason::UnknownFunction(n) => write!(f, "unknown function {n}"),
            SkipReason::Disabled(n) => write!(f, "{n} is disabled in this task"),
            SkipReason::BadArguments(m) => write!(f, "bad arguments: {m}"),
            SkipReason::AliasUnset => f.write_str("\"crt\" does not refer to any object"),
            SkipReason::UnknownObject(id) => write!(f, "unknown object {id:?}"),
            SkipReason::UnknownPrefab(id) => write!(f, "unknown prefab {id:?}"),
            SkipReason::ZeroDirection => f.write_str("direction is zero"),
            SkipReason::InvalidScale => f.write_str("scale must be positive"),
            SkipReason::UpLocked(n) => write!(f, "{n} must stay upright and cannot be tilted"),
        }
    }
}

impl From<SceneError> for SkipReason {
    fn from(e: SceneError) -> Self {
        match e {
            SceneError::UnknownObject(id) => SkipReason::UnknownObject(id),
            SceneError::UnknownPrefab(id) => SkipReason::UnknownPrefab(id),
            SceneError::InvalidScale => SkipReason::InvalidScale,
            SceneError::Orientation(_) => SkipReason::ZeroDirection,
            other => SkipReason::BadArguments(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OutcomeStatus {
    Applied,
    Skipped(SkipReason),
    Message(String),
    Debug(String),
}

/// What an applied line did to the scene, for observers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(tag = "kind", content = "object_id", rename_all = "lowercase")]
pub enum SceneChange {
    Upsert(String),
    Removed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionOutcome {
    pub line: String,
    pub status: OutcomeStatus,
    /// Scene revision after an applied line.
    pub revision: Option<u64>,
    pub change: Option<SceneChange>,
}

impl ExecutionOutcome {
    fn new(line: &str, status: OutcomeStatus) -> Self {
        Self {
            line: line.to_string(),
            status,
            revision: None,
            change: None,
        }
    }

    pub fn is_applied(&self) -> bool {
        self.status == OutcomeStatus::Applied
    }

    /// Lines that "ran" and belong in the assistant history.
    pub fn succeeded(&self) -> bool {
        !matches!(self.status, OutcomeStatus::Skipped(_))
    }

    pub fn record(&self) -> OutcomeRecord {
        let (status, reason) = match &self.status {
            OutcomeStatus::Applied => ("applied", None),
            OutcomeStatus::Skipped(r) => ("skipped", Some(r.to_string())),
            OutcomeStatus::Message(m) => ("message", Some(m.clone())),
            OutcomeStatus::Debug(m) => ("debug", Some(m.clone())),
        };
        OutcomeRecord {
            line: self.line.clone(),
            status: status.to_string(),
            reason,
            revision: self.revision,
        }
    }
}

/// One line of the outcome log. For messages `reason` carries the text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct OutcomeRecord {
    pub line: String,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub revision: Option<u64>,
}

impl Serialize for ExecutionOutcome {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.record().serialize(s)
    }
}

/// Formats outcomes as JSONL.
pub fn outcome_log(outcomes: &[ExecutionOutcome]) -> String {
    outcomes
        .iter()
        .map(|o| serde_json::to_string(&o.record()).expect("outcome record serializes") + "\n")
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AliasState {
    pub crt: Option<String>,
}

/// Per-session executor state.
#[derive(Debug, Clone, Default)]
pub struct CommandRuntime {
    pub alias: AliasState,
    pub mode: TaskMode,
}

type Exec = Result<Option<SceneChange>, SkipReason>;

struct Components {
    x: Option<f64>,
    y: Option<f64>,
    z: Option<f64>,
}

impl Components {
    fn or(&self, base: Vec3) -> Vec3 {
        Vec3::new(
            self.x.unwrap_or(base.x),
            self.y.unwrap_or(base.y),
            self.z.unwrap_or(base.z),
        )
    }
}

fn bad(msg: impl Into<String>) -> SkipReason {
    SkipReason::BadArguments(msg.into())
}

fn string_arg<'a>(args: &'a [Arg], idx: usize, what: &str) -> Result<&'a str, SkipReason> {
    match args.get(idx) {
        Some(Arg::Str(s)) => Ok(s),
        Some(other) => Err(bad(format!("{what} must be a string, got {other:?}"))),
        None => Err(bad(format!("missing {what}"))),
    }
}

/// Positional components after the id, then named overrides.
fn components(args: &[Arg]) -> Result<Components, SkipReason> {
    let mut slots: [Option<Option<f64>>; 3] = [None, None, None];
    let mut positional = 0;
    for arg in args {
        let (idx, value) = match arg {
            Arg::Num(v) => {
                positional += 1;
                (positional - 1, Some(*v))
            }
            Arg::Null => {
                positional += 1;
                (positional - 1, None)
            }
            Arg::Named(axis, v) => (
                match axis {
                    Axis::X => 0,
                    Axis::Y => 1,
                    Axis::Z => 2,
                },
                *v,
            ),
            Arg::Str(s) => return Err(bad(format!("expected a number, got {s:?}"))),
        };
        if idx > 2 {
            return Err(bad("too many components"));
        }
        if slots[idx].is_some() {
            return Err(bad("component given twice"));
        }
        if value.is_some_and(|v| !v.is_finite()) {
            return Err(bad("component is not finite"));
        }
        slots[idx] = Some(value);
    }
    Ok(Components {
        x: slots[0].flatten(),
        y: slots[1].flatten(),
        z: slots[2].flatten(),
    })
}

fn exact_args(call: &ApiCall, n: usize) -> Result<(), SkipReason> {
    if call.args.len() != n {
        return Err(bad(format!(
            "{} takes {n} argument(s), got {}",
            call.name,
            call.args.len()
        )));
    }
    Ok(())
}

impl CommandRuntime {
    pub fn new(mode: TaskMode) -> Self {
        Self {
            alias: AliasState::default(),
            mode,
        }
    }

    /// Parses and executes one response line.
    pub fn execute_line(&mut self, scene: &mut Scene, text: &str) -> ExecutionOutcome {
        match parse_line(text) {
            Ok(Line::Comment) => ExecutionOutcome::new(text.trim(), OutcomeStatus::Skipped(SkipReason::Comment)),
            Ok(Line::Call(call)) => self.execute(scene, &call),
            Err(e) => ExecutionOutcome::new(text.trim(), OutcomeStatus::Skipped(SkipReason::Parse(e))),
        }
    }

    pub fn execute(&mut self, scene: &mut Scene, call: &ApiCall) -> ExecutionOutcome {
        let line = call.raw_line.as_str();
        match call.name.as_str() {
            "MESSAGE" | "EXPLAIN" => {
                let status = match (exact_args(call, 1), call.args.first()) {
                    (Ok(()), Some(Arg::Str(s))) if call.name == "MESSAGE" => OutcomeStatus::Message(s.clone()),
                    (Ok(()), Some(Arg::Str(s))) => OutcomeStatus::Debug(s.clone()),
                    (Err(e), _) => OutcomeStatus::Skipped(e),
                    _ => OutcomeStatus::Skipped(bad("content must be a string")),
                };
                return ExecutionOutcome::new(line, status);
            }
            _ => {}
        }
        let result = match call.name.as_str() {
            "CREATE" => self.create(scene, call),
            "MOVE" => self.mov(scene, call),
            "FORWARD" => self.forward(scene, call),
            "LOOKAT" => self.lookat(scene, call),
            "SCALE" => self.scale(scene, call),
            "DELETE" => self.delete(scene, call),
            other => Err(SkipReason::UnknownFunction(other.to_string())),
        };
        let out = match result {
            Ok(change) => {
                let mut o = ExecutionOutcome::new(line, OutcomeStatus::Applied);
                o.change = change;
                o.revision = Some(scene.revision());
                o
            }
            Err(reason) => ExecutionOutcome::new(line, OutcomeStatus::Skipped(reason)),
        };
        // A failed DELETE elsewhere can't dangle the alias, but an object
        // removed by some other path (voice, direct control) can.
        if let Some(id) = &self.alias.crt {
            if scene.object(id).is_none() {
                self.alias.crt = None;
            }
        }
        out
    }

    fn target(&self, scene: &Scene, reference: &str) -> Result<String, SkipReason> {
        if reference == CRT {
            let id = self.alias.crt.as_deref().ok_or(SkipReason::AliasUnset)?;
            return scene
                .object(id)
                .map(|o| o.object_id.clone())
                .ok_or(SkipReason::AliasUnset);
        }
        scene
            .resolve(reference)
            .map(|o| o.object_id.clone())
            .ok_or_else(|| SkipReason::UnknownObject(reference.to_string()))
    }

    fn enabled(&self, name: &str) -> Result<(), SkipReason> {
        if self.mode == TaskMode::Task1 && matches!(name, "CREATE" | "DELETE") {
            return Err(SkipReason::Disabled(name.to_string()));
        }
        Ok(())
    }

    fn create(&mut self, scene: &mut Scene, call: &ApiCall) -> Exec {
        self.enabled("CREATE")?;
        exact_args(call, 1)?;
        let wanted = string_arg(&call.args, 0, "prefab id")?;
        let prefab_id = match scene.prefab(wanted) {
            Some(p) => p.prefab_id.clone(),
            None => {
                let mut hits = scene
                    .prefabs()
                    .iter()
                    .filter(|p| p.prefab_id.eq_ignore_ascii_case(wanted.trim()));
                match (hits.next(), hits.next()) {
                    (Some(p), None) => p.prefab_id.clone(),
                    _ => return Err(SkipReason::UnknownPrefab(wanted.to_string())),
                }
            }
        };
        let (position, orientation) = scene.spawn_pose();
        let id = scene.create(&prefab_id, position, orientation)?;
        self.alias.crt = Some(id.clone());
        Ok(Some(SceneChange::Upsert(id)))
    }

    fn mov(&mut self, scene: &mut Scene, call: &ApiCall) -> Exec {
        let id = self.target(scene, string_arg(&call.args, 0, "object id")?)?;
        let c = components(&call.args[1..])?;
        let current = scene.object(&id).map(|o| o.position).unwrap_or_default();
        scene.set_position(&id, c.or(current))?;
        self.alias.crt = Some(id.clone());
        Ok(Some(SceneChange::Upsert(id)))
    }

    fn forward(&mut self, scene: &mut Scene, call: &ApiCall) -> Exec {
        let id = self.target(scene, string_arg(&call.args, 0, "object id")?)?;
        let c = components(&call.args[1..])?;
        let dir = c.or(Vec3::ZERO);
        scene.set_forward(&id, dir)?;
        Ok(Some(SceneChange::Upsert(id)))
    }

    fn lookat(&mut self, scene: &mut Scene, call: &ApiCall) -> Exec {
        let id = self.target(scene, string_arg(&call.args, 0, "object id")?)?;
        let c = components(&call.args[1..])?;
        let position = scene.object(&id).map(|o| o.position).unwrap_or_default();
        let dir = c.or(position) - position;
        scene.set_forward(&id, dir)?;
        self.alias.crt = Some(id.clone());
        Ok(Some(SceneChange::Upsert(id)))
    }

    fn scale(&mut self, scene: &mut Scene, call: &ApiCall) -> Exec {
        let id = self.target(scene, string_arg(&call.args, 0, "object id")?)?;
        let c = components(&call.args[1..])?;
        let current = scene.object(&id).map(|o| o.scale).unwrap_or(Vec3::ONE);
        scene.set_scale(&id, c.or(current))?;
        self.alias.crt = Some(id.clone());
        Ok(Some(SceneChange::Upsert(id)))
    }

    fn delete(&mut self, scene: &mut Scene, call: &ApiCall) -> Exec {
        self.enabled("DELETE")?;
        exact_args(call, 1)?;
        let id = self.target(scene, string_arg(&call.args, 0, "object id")?)?;
        scene.delete(&id)?;
        if self.alias.crt.as_deref() == Some(id.as_str()) {
            self.alias.crt = None;
        }
        Ok(Some(SceneChange::Removed(id)))
    }

    /// Runs every line in order; one outcome per line.
    pub fn execute_all<'a>(
        &mut self,
        scene: &mut Scene,
        lines: impl IntoIterator<Item = &'a str>,
    ) -> Vec<ExecutionOutcome> {
        lines.into_iter().map(|l| self.execute_line(scene, l)).collect()
    }
}

/// The lines that belong in the assistant history, newline-joined.
pub fn executed_lines(outcomes: &[ExecutionOutcome]) -> Vec<String> {
    outcomes
        .iter()
        .filter(|o| o.succeeded())
        .map(|o| o.line.clone())
        .collect()
}
