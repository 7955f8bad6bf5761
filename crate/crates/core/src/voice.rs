//! Deterministic keyword interpreter: ⟨verb, subject, (direction), (number unit)⟩.
//!
//! Utterances compile to the same calls the model uses, so a voice command
//! and its API-call equivalent leave identical scenes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::capture::{PointCue, TaskMode};
use crate::geometry::Vec3;
use crate::runtime::{ApiCall, Arg, CommandRuntime, ExecutionOutcome, OutcomeStatus, SkipReason};
use crate::scene::Scene;

const GRAMMAR_JSON: &str = include_str!("../prompts/voice_grammar.json");

#[derive(Debug, Clone, Deserialize)]
pub struct Defaults {
    pub move_cm: f64,
    pub rotate_degrees: f64,
    pub scale: f64,
}

/// Keyword tables, loaded from `prompts/voice_grammar.json`.
#[derive(Debug, Clone, Deserialize)]
pub struct Grammar {
    pub verbs: Vec<String>,
    pub this: Vec<String>,
    pub directions: BTreeMap<String, Vec<String>>,
    pub direction_synonyms: BTreeMap<String, String>,
    pub units: BTreeMap<String, Vec<String>>,
    pub verb_units: BTreeMap<String, Vec<String>>,
    pub number_prefixes: Vec<String>,
    pub number_words: Vec<String>,
    pub defaults: Defaults,
}

impl Grammar {
    pub fn shipped() -> &'static Grammar {
        static G: OnceLock<Grammar> = OnceLock::new();
        G.get_or_init(|| serde_json::from_str(GRAMMAR_JSON).expect("voice grammar asset is valid"))
    }

    fn all_directions(&self) -> BTreeSet<&str> {
        self.directions.values().flatten().map(String::as_str).collect()
    }

    fn direction(&self, token: &str) -> Option<&str> {
        let canonical = self.direction_synonyms.get(token).map(String::as_str).unwrap_or(token);
        self.all_directions().into_iter().find(|d| *d == canonical)
    }

    fn unit(&self, token: &str) -> Option<Unit> {
        let (name, _) = self.units.iter().find(|(_, words)| words.iter().any(|w| w == token))?;
        Some(match name.as_str() {
            "cm" => Unit::Cm,
            "m" => Unit::M,
            _ => Unit::Degree,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verb {
    Create,
    Delete,
    Move,
    Rotate,
    Scale,
}

impl Verb {
    fn parse(s: &str) -> Option<Verb> {
        Some(match s {
            "create" => Verb::Create,
            "delete" => Verb::Delete,
            "move" => Verb::Move,
            "rotate" => Verb::Rotate,
            "scale" => Verb::Scale,
            _ => return None,
        })
    }

    fn key(self) -> &'static str {
        match self {
            Verb::Create => "create",
            Verb::Delete => "delete",
            Verb::Move => "move",
            Verb::Rotate => "rotate",
            Verb::Scale => "scale",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Subject {
    /// Every instance of a prefab (or the prefab itself for create).
    PrefabRef(String),
    /// One object by display name.
    ObjectRef(String),
    /// The current selection.
    This,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Left,
    Right,
    Up,
    Down,
    Forward,
    Backward,
    Here,
    Whole,
    Length,
    Width,
    Height,
}

impl Direction {
    fn parse(s: &str) -> Option<Direction> {
        Some(match s {
            "left" => Direction::Left,
            "right" => Direction::Right,
            "up" => Direction::Up,
            "down" => Direction::Down,
            "forward" => Direction::Forward,
            "backward" => Direction::Backward,
            "here" => Direction::Here,
            "length" => Direction::Length,
            "width" => Direction::Width,
            "height" => Direction::Height,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    Cm,
    M,
    Degree,
    Factor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Magnitude {
    pub value: f64,
    pub unit: Unit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoiceCommand {
    pub verb: Verb,
    pub subject: Subject,
    pub direction: Option<Direction>,
    pub magnitude: Option<Magnitude>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectionState {
    /// Selected object ids, in selection order.
    pub selected: Vec<String>,
    pub last_point: Option<PointCue>,
}

impl SelectionState {
    /// Drops ids that no longer exist.
    pub fn prune(&mut self, scene: &Scene) {
        self.selected.retain(|id| scene.object(id).is_some());
    }
}

/// Why an utterance was rejected; the slot name is what the user hears.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(rename_all = "snake_case")]
pub enum NoMatch {
    #[error("missing_verb: say create, delete, move, rotate or scale")]
    MissingVerb,
    #[error("missing_subject: name an object, a prefab or \"this\"")]
    MissingSubject,
    #[error("unresolvable_subject: {0}")]
    UnresolvableSubject(String),
    #[error("illegal_direction: {0}")]
    IllegalDirection(String),
    #[error("missing_direction: {0} needs a direction or \"here\"")]
    MissingDirection(String),
    #[error("missing_point: point at a location before saying \"here\"")]
    MissingPoint,
    #[error("illegal_unit: {0}")]
    IllegalUnit(String),
}

impl NoMatch {
    pub fn slot(&self) -> &'static str {
        match self {
            NoMatch::MissingVerb => "missing_verb",
            NoMatch::MissingSubject => "missing_subject",
            NoMatch::UnresolvableSubject(_) => "unresolvable_subject",
            NoMatch::IllegalDirection(_) => "illegal_direction",
            NoMatch::MissingDirection(_) => "missing_direction",
            NoMatch::MissingPoint => "missing_point",
            NoMatch::IllegalUnit(_) => "illegal_unit",
        }
    }
}

fn is_number(t: &str) -> bool {
    !t.is_empty()
        && t.bytes().all(|b| b.is_ascii_digit() || b == b'.')
        && t.bytes().next().is_some_and(|b| b.is_ascii_digit())
}

/// Lowercases, replaces anything outside `[a-z0-9]` with a space (a `.`
/// between two digits is kept as a decimal point), splits letter/digit
/// runs, and maps number words one..twenty to digits.
pub fn normalize(text: &str) -> Vec<String> {
    normalize_with(Grammar::shipped(), text)
}

pub fn normalize_with(g: &Grammar, text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().flat_map(char::to_lowercase).collect();
    let mut cleaned = String::with_capacity(chars.len());
    for (i, &c) in chars.iter().enumerate() {
        let digit_at = |j: Option<usize>| j.and_then(|j| chars.get(j)).is_some_and(|c| c.is_ascii_digit());
        if c.is_ascii_lowercase() || c.is_ascii_digit() {
            if let Some(prev) = cleaned.chars().last() {
                if (prev.is_ascii_digit() && c.is_ascii_lowercase())
                    || (prev.is_ascii_lowercase() && c.is_ascii_digit())
                {
                    cleaned.push(' ');
                }
            }
            cleaned.push(c);
        } else if c == '.' && digit_at(i.checked_sub(1)) && digit_at(Some(i + 1)) {
            cleaned.push('.');
        } else {
            cleaned.push(' ');
        }
    }
    cleaned
        .split_whitespace()
        .map(|t| match g.number_words.iter().position(|w| w == t) {
            Some(i) => (i + 1).to_string(),
            None => t.to_string(),
        })
        .collect()
}

/// Matches `pattern` at `tokens[i..]`, letting "number"/"no" precede a
/// numeric pattern token. Returns the end index.
fn match_at(g: &Grammar, tokens: &[String], mut i: usize, pattern: &[String]) -> Option<usize> {
    for p in pattern {
        if is_number(p) {
            while tokens.get(i).is_some_and(|t| g.number_prefixes.contains(t)) {
                i += 1;
            }
        }
        if tokens.get(i)? != p {
            return None;
        }
        i += 1;
    }
    Some(i)
}

struct SubjectMatch {
    subject: Subject,
    end: usize,
}

fn find_subject(g: &Grammar, verb: Verb, tokens: &[String], from: usize, scene: &Scene) -> Option<SubjectMatch> {
    let prefabs: Vec<(Vec<String>, &str)> = scene
        .prefabs()
        .iter()
        .map(|p| (normalize_with(g, &p.prefab_id), p.prefab_id.as_str()))
        .collect();
    let objects: Vec<(Vec<String>, &str)> = scene
        .objects()
        .iter()
        .map(|o| (normalize_with(g, &o.display_name), o.display_name.as_str()))
        .collect();
    for i in from..tokens.len() {
        if verb != Verb::Create && g.this.contains(&tokens[i]) {
            return Some(SubjectMatch {
                subject: Subject::This,
                end: i + 1,
            });
        }
        let mut best: Option<SubjectMatch> = None;
        let mut consider = |end: Option<usize>, subject: Subject| {
            if let Some(end) = end {
                if best.as_ref().is_none_or(|b| end > b.end) {
                    best = Some(SubjectMatch { subject, end });
                }
            }
        };
        if verb != Verb::Create {
            for (pattern, name) in &objects {
                consider(match_at(g, tokens, i, pattern), Subject::ObjectRef(name.to_string()));
            }
        }
        for (pattern, id) in &prefabs {
            consider(match_at(g, tokens, i, pattern), Subject::PrefabRef(id.to_string()));
        }
        if best.is_some() {
            return best;
        }
    }
    None
}

/// Interprets normalized tokens.
pub fn parse_command(tokens: &[String], scene: &Scene, selection: &SelectionState) -> Result<VoiceCommand, NoMatch> {
    parse_command_with(Grammar::shipped(), tokens, scene, selection)
}

pub fn parse_command_with(
    g: &Grammar,
    tokens: &[String],
    scene: &Scene,
    selection: &SelectionState,
) -> Result<VoiceCommand, NoMatch> {
    let (verb_at, verb) = tokens
        .iter()
        .enumerate()
        .find_map(|(i, t)| g.verbs.contains(t).then(|| Verb::parse(t)).flatten().map(|v| (i, v)))
        .ok_or(NoMatch::MissingVerb)?;
    let SubjectMatch { subject, end } =
        find_subject(g, verb, tokens, verb_at + 1, scene).ok_or(NoMatch::MissingSubject)?;

    match &subject {
        Subject::This if selection.selected.iter().all(|id| scene.object(id).is_none()) => {
            return Err(NoMatch::UnresolvableSubject("nothing is selected".into()));
        }
        Subject::PrefabRef(p) if verb != Verb::Create && !scene.objects().iter().any(|o| &o.prefab_id == p) => {
            return Err(NoMatch::UnresolvableSubject(format!("there is no {p} in the room")));
        }
        _ => {}
    }

    let rest = &tokens[end..];
    let legal = g.directions.get(verb.key());
    let mut direction = None;
    for t in rest {
        if let Some(d) = g.direction(t) {
            if !legal.is_some_and(|l| l.iter().any(|x| x == d)) {
                return Err(NoMatch::IllegalDirection(format!("cannot {} {d}", verb.key())));
            }
            direction = Direction::parse(d);
            break;
        }
    }
    let direction = match (verb, direction) {
        (Verb::Scale, None) => Some(Direction::Whole),
        (Verb::Move | Verb::Rotate, None) => return Err(NoMatch::MissingDirection(verb.key().into())),
        (Verb::Create | Verb::Delete, _) => None,
        (_, d) => d,
    };
    if direction == Some(Direction::Here) && selection.last_point.is_none() {
        return Err(NoMatch::MissingPoint);
    }

    let mut magnitude = None;
    if matches!(verb, Verb::Move | Verb::Rotate | Verb::Scale) && direction != Some(Direction::Here) {
        // The number may come before or after the direction word.
        let number_at = rest.iter().position(|t| is_number(t));
        if let Some(i) = number_at {
            let value: f64 = rest[i].parse().unwrap_or(f64::NAN);
            let allowed = g.verb_units.get(verb.key()).cloned().unwrap_or_default();
            let unit = match rest.get(i + 1).and_then(|t| g.unit(t)) {
                Some(u) => {
                    let key = match u {
                        Unit::Cm => "cm",
                        Unit::M => "m",
                        _ => "degree",
                    };
                    if !allowed.iter().any(|a| a == key) {
                        return Err(NoMatch::IllegalUnit(format!(
                            "cannot {} by {}",
                            verb.key(),
                            rest[i + 1]
                        )));
                    }
                    u
                }
                None => match verb {
                    Verb::Move => Unit::Cm,
                    Verb::Rotate => Unit::Degree,
                    _ => Unit::Factor,
                },
            };
            if value.is_finite() {
                magnitude = Some(Magnitude { value, unit });
            }
        }
    }
    Ok(VoiceCommand {
        verb,
        subject,
        direction,
        magnitude,
    })
}

/// Object ids the command acts on, in a stable order.
pub fn resolve_targets(subject: &Subject, scene: &Scene, selection: &SelectionState) -> Vec<String> {
    match subject {
        Subject::This => selection
            .selected
            .iter()
            .filter(|id| scene.object(id).is_some())
            .cloned()
            .collect(),
        Subject::ObjectRef(name) => scene.resolve(name).map(|o| o.object_id.clone()).into_iter().collect(),
        Subject::PrefabRef(p) => scene
            .objects()
            .iter()
            .filter(|o| &o.prefab_id == p)
            .map(|o| o.object_id.clone())
            .collect(),
    }
}

fn call(name: &str, id: &str, nums: &[(Option<char>, f64)]) -> ApiCall {
    let mut args = vec![Arg::Str(id.to_string())];
    let mut text = format!("{name}({id:?}");
    for (axis, v) in nums {
        match axis {
            None => {
                args.push(Arg::Num(*v));
                text.push_str(&format!(", {v}"));
            }
            Some(a) => {
                let axis = match a {
                    'x' => crate::runtime::Axis::X,
                    'y' => crate::runtime::Axis::Y,
                    _ => crate::runtime::Axis::Z,
                };
                args.push(Arg::Named(axis, Some(*v)));
                text.push_str(&format!(", {a}={v}"));
            }
        }
    }
    text.push_str(");");
    ApiCall {
        name: name.to_string(),
        args,
        raw_line: text,
    }
}

fn xyz(v: Vec3) -> [(Option<char>, f64); 3] {
    [(None, v.x), (None, v.y), (None, v.z)]
}

/// Executes a command with a default (all actions enabled) runtime.
pub fn apply_command(cmd: &VoiceCommand, scene: &mut Scene, selection: &mut SelectionState) -> Vec<ExecutionOutcome> {
    apply_command_with(cmd, scene, selection, &mut CommandRuntime::new(TaskMode::Task2))
}

/// Executes a command through `runtime`; one outcome per target.
pub fn apply_command_with(
    cmd: &VoiceCommand,
    scene: &mut Scene,
    selection: &mut SelectionState,
    runtime: &mut CommandRuntime,
) -> Vec<ExecutionOutcome> {
    let d = &Grammar::shipped().defaults;
    if cmd.verb == Verb::Create {
        let Subject::PrefabRef(p) = &cmd.subject else {
            return vec![];
        };
        let c = ApiCall {
            name: "CREATE".into(),
            args: vec![Arg::Str(p.clone())],
            raw_line: format!("CREATE({p:?});"),
        };
        return vec![runtime.execute(scene, &c)];
    }
    let targets = resolve_targets(&cmd.subject, scene, selection);
    let mut out = Vec::with_capacity(targets.len());
    for id in targets {
        let Some(obj) = scene.object(&id).cloned() else {
            continue;
        };
        let o = obj.orientation;
        let outcome = match (cmd.verb, cmd.direction) {
            (Verb::Delete, _) => runtime.execute(scene, &call("DELETE", &id, &[])),
            (Verb::Move, Some(Direction::Here)) => {
                let p = selection
                    .last_point
                    .as_ref()
                    .map(|p| p.position)
                    .unwrap_or(obj.position);
                runtime.execute(scene, &call("MOVE", &id, &xyz(p)))
            }
            (Verb::Move, Some(dir)) => {
                let metres = match cmd.magnitude {
                    Some(Magnitude { value, unit: Unit::M }) => value,
                    Some(Magnitude { value, .. }) => value / 100.0,
                    None => d.move_cm / 100.0,
                };
                let axis = match dir {
                    Direction::Left => -o.right,
                    Direction::Right => o.right,
                    Direction::Up => o.up,
                    Direction::Down => -o.up,
                    Direction::Forward => o.forward,
                    _ => -o.forward,
                };
                runtime.execute(scene, &call("MOVE", &id, &xyz(obj.position + axis * metres)))
            }
            (Verb::Rotate, Some(Direction::Here)) => {
                let p = selection
                    .last_point
                    .as_ref()
                    .map(|p| p.position)
                    .unwrap_or(obj.position);
                runtime.execute(scene, &call("LOOKAT", &id, &xyz(p)))
            }
            (Verb::Rotate, Some(dir)) => {
                let degrees = cmd.magnitude.map(|m| m.value).unwrap_or(d.rotate_degrees);
                let rad = degrees.to_radians();
                let locked = scene.prefab(&obj.prefab_id).is_none_or(|p| p.up_locked());
                let turned = match dir {
                    Direction::Left => Some(o.yawed(-rad)),
                    Direction::Right => Some(o.yawed(rad)),
                    Direction::Up if !locked => Some(o.pitched(rad)),
                    Direction::Down if !locked => Some(o.pitched(-rad)),
                    _ => None,
                };
                match turned {
                    Some(t) => runtime.execute(scene, &call("FORWARD", &id, &xyz(t.forward))),
                    None => ExecutionOutcome {
                        line: format!("rotate {} {:?}", obj.display_name, dir).to_lowercase(),
                        status: OutcomeStatus::Skipped(SkipReason::UpLocked(obj.display_name.clone())),
                        revision: None,
                        change: None,
                    },
                }
            }
            (Verb::Scale, dir) => {
                let v = cmd.magnitude.map(|m| m.value).unwrap_or(d.scale);
                let args: Vec<(Option<char>, f64)> = match dir {
                    Some(Direction::Length) => vec![(Some('z'), v)],
                    Some(Direction::Width) => vec![(Some('x'), v)],
                    Some(Direction::Height) => vec![(Some('y'), v)],
                    _ => vec![(None, v), (None, v), (None, v)],
                };
                runtime.execute(scene, &call("SCALE", &id, &args))
            }
            _ => continue,
        };
        out.push(outcome);
    }
    selection.prune(scene);
    out
}

impl fmt::Display for VoiceCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let subject = match &self.subject {
            Subject::PrefabRef(p) => p.clone(),
            Subject::ObjectRef(n) => n.clone(),
            Subject::This => "this".into(),
        };
        write!(f, "{} {subject}", self.verb.key())?;
        if let Some(d) = self.direction {
            write!(f, " {}", format!("{d:?}").to_lowercase())?;
        }
        if let Some(m) = self.magnitude {
            write!(f, " {} {}", m.value, format!("{:?}", m.unit).to_lowercase())?;
        }
        Ok(())
    }
}
