//! Shared test inputs: the furnished-room session rebuilt as capture events.
#![allow(dead_code)]

use scenecmd_core::scene::RayHit;
use scenecmd_core::session::{Aim, IngestEvent, InteractionMode, Session, SessionConfig};
use scenecmd_core::{SceneFile, Vec3};

pub const SCENE: &str = include_str!("../../scenes/furnished_room.json");
pub const ASSISTANT: &str = include_str!("../fixtures/furnished_room_assistant.txt");
pub const USER: &str = include_str!("../fixtures/furnished_room_user_prompt.json");

pub const DISPLAY_TEXT: &str = "Put a table with four chairs under the light and move the cactus on top of the table and create 4 pictures along this line on the wall and also create a carpet here. ";
pub const ANNOTATED: &str = "put a table with four chairs under the light and move the cactus on top of the table [<d0>start] and create four pictures along [<d0>end] this line on the wall and also create a [<h0>] carpet here ";

pub const WORDS: &str = "put a table with four chairs under the light and move the cactus on top of the table and create four pictures along this line on the wall and also create a carpet here";

pub const SPEECH_START_MS: u64 = 11_500;
pub const WORD_STEP_MS: u64 = 550;
pub const WORD_LEN_MS: u64 = 400;

pub fn scene_file() -> SceneFile {
    SceneFile::from_json(SCENE).unwrap()
}

pub fn words() -> Vec<(String, u64, u64)> {
    WORDS
        .split(' ')
        .enumerate()
        .map(|(i, w)| {
            let start = SPEECH_START_MS + i as u64 * WORD_STEP_MS;
            (w.to_string(), start, start + WORD_LEN_MS)
        })
        .collect()
}

/// Midpoint of the gap before word `i`.
pub fn gap_before(i: usize) -> u64 {
    SPEECH_START_MS + i as u64 * WORD_STEP_MS - (WORD_STEP_MS - WORD_LEN_MS) / 2
}

fn word_index(word: &str, nth: usize) -> usize {
    WORDS
        .split(' ')
        .enumerate()
        .filter(|(_, w)| *w == word)
        .nth(nth)
        .map(|(i, _)| i)
        .unwrap()
}

fn hit(object: &str, p: Vec3, n: Vec3) -> Aim {
    Aim::Hit(RayHit {
        object: object.into(),
        position: p,
        normal: n,
    })
}

/// Words, head poses, one line along the wall and one floor point, ending in
/// a finalize — in arrival order.
pub fn capture_events() -> Vec<IngestEvent> {
    let words = words();
    let last_end = words.last().unwrap().2;
    let player = Vec3::new(2.03, 1.18, 1.44);
    // First a silent look around, then a steady look while speaking.
    let look_a = Vec3::new(0.93, 0.06, 0.36);
    let look_b = (Vec3::new(6.5, 1.2, 5.5) - player).normalized().unwrap();
    let mut timed: Vec<(u64, u8, IngestEvent)> = Vec::new();
    let mut t = 0;
    while t <= last_end {
        let forward = if t < 11_160 { look_a } else { look_b };
        let right = Vec3::UP.cross(forward).normalized().unwrap();
        timed.push((
            t,
            0,
            IngestEvent::Pose {
                t_ms: t,
                position: player,
                forward,
                right,
            },
        ));
        t += 100;
    }
    for (text, start_ms, end_ms) in &words {
        timed.push((
            *end_ms,
            1,
            IngestEvent::Word {
                text: text.clone(),
                start_ms: *start_ms,
                end_ms: *end_ms,
            },
        ));
    }
    let line_start = gap_before(word_index("table", 1) + 1);
    let line_end = gap_before(word_index("along", 0) + 1);
    timed.push((
        line_end,
        2,
        IngestEvent::Line {
            start_ms: line_start,
            duration_ms: line_end - line_start,
            start: hit(
                "Wall_X_Negative",
                Vec3::new(9.94, 1.52, 7.006),
                Vec3::new(-1.0, 0.0, 0.0),
            ),
            end_position: Vec3::new(11.45, 1.65, 3.714),
            release: None,
        },
    ));
    let point_t = gap_before(word_index("carpet", 0));
    timed.push((
        point_t,
        2,
        IngestEvent::Point {
            t_ms: point_t,
            target: hit("Floor", Vec3::new(7.54, 0.05, 2.99), Vec3::UP),
        },
    ));
    // The pose at release, as reported with the request.
    timed.push((
        last_end + 200,
        0,
        IngestEvent::Pose {
            t_ms: last_end + 200,
            position: player,
            forward: look_a,
            right: Vec3::new(0.37, -0.07, -0.93),
        },
    ));
    timed.sort_by_key(|(t, k, _)| (*t, *k));
    let mut out: Vec<IngestEvent> = timed.into_iter().map(|(_, _, e)| e).collect();
    out.push(IngestEvent::Finalize {
        t_ms: last_end + 300,
        display_text: Some(DISPLAY_TEXT.to_string()),
    });
    out
}

pub fn mover_config() -> SessionConfig {
    SessionConfig {
        mode: InteractionMode::Mover,
        ..Default::default()
    }
}

/// Runs the furnished-room session synchronously with the verbatim response
/// streamed at `spacing_ms`, and closes it.
pub fn run_golden(spacing_ms: u64) -> Session {
    let mut s = Session::new(mover_config(), &scene_file()).unwrap();
    let mut request = None;
    for ev in capture_events() {
        if let Some(r) = s.ingest(ev).request {
            request = Some(r);
        }
    }
    let req = request.expect("finalize produced a request");
    let lines: Vec<&str> = ASSISTANT.lines().collect();
    for (i, line) in lines.iter().enumerate() {
        s.response_line(req.request_id, (i as u64 + 1) * spacing_ms, line);
    }
    s.end_request(req.request_id, (lines.len() as u64 + 1) * spacing_ms, None);
    s.close();
    s
}
