//! Shared inputs for the criterion benches: the furnished-room scene, its
//! 29-line response and a timed transcript with two gesture cues.

use scenecmd_core::capture::{LineCue, LineEnd, PointCue, TimedWord};
use scenecmd_core::{Scene, SceneFile, Vec3};

pub const SCENE: &str = include_str!("../../core/scenes/furnished_room.json");
pub const RESPONSE: &str = include_str!("../../core/tests/fixtures/furnished_room_assistant.txt");
pub const WORDS: &str = "put a table with four chairs under the light and move the cactus on top of the table and create four pictures along this line on the wall and also create a carpet here";

pub fn scene() -> Scene {
    Scene::from_file(&SceneFile::from_json(SCENE).expect("scene parses")).expect("scene loads")
}

pub fn words() -> Vec<TimedWord> {
    WORDS
        .split(' ')
        .enumerate()
        .map(|(i, w)| {
            let start = 11_500 + i as u64 * 550;
            TimedWord {
                text: w.to_string(),
                start_ms: start,
                end_ms: start + 400,
            }
        })
        .collect()
}

pub fn cues() -> (Vec<PointCue>, Vec<LineCue>) {
    let end = |object: &str, p: Vec3, n: Vec3| LineEnd {
        object: object.into(),
        position: p,
        normal: n,
    };
    let point = PointCue {
        hit_id: "h0".into(),
        t_ms: 28_000,
        object: "Floor".into(),
        position: Vec3::new(7.54, 0.05, 2.99),
        normal: Vec3::UP,
    };
    let wall = end(
        "Wall_X_Negative",
        Vec3::new(9.94, 1.52, 7.006),
        Vec3::new(-1.0, 0.0, 0.0),
    );
    let line = LineCue {
        line_id: "d0".into(),
        start_ms: 20_000,
        duration_ms: 5_500,
        start: wall.clone(),
        end: end("End point", Vec3::new(11.45, 1.65, 3.714), Vec3::new(1.51, 0.13, -3.29)),
        project: wall,
        degenerate: false,
    };
    (vec![point], vec![line])
}
