//! System prompt templates and the pinned one-shot example.

use super::{ChatMessage, GatewayError};
use crate::capture::TaskMode;
use crate::scene::{room_info_text, scene_to_json, Scene};

pub const SYSTEM_TASK1: &str = include_str!("../../prompts/system_task1.txt");
pub const SYSTEM_TASK2: &str = include_str!("../../prompts/system_task2.txt");
pub const ONE_SHOT_USER: &str = include_str!("../../prompts/one_shot_user.json");
pub const ONE_SHOT_ASSISTANT: &str = include_str!("../../prompts/one_shot_assistant.txt");

const PREFABS: &str = "<prefabs_info>";
const ROOM: &str = "<room_info>";
const ENV: &str = "<env_objects>";

pub fn system_template(mode: TaskMode) -> &'static str {
    match mode {
        TaskMode::Task1 => SYSTEM_TASK1,
        TaskMode::Task2 => SYSTEM_TASK2,
    }
}

/// Substitutes the catalog (2-space JSON), room text and environment list
/// (4-space JSON) into a template.
pub fn render_system_prompt(template: &str, scene: &Scene) -> Result<String, GatewayError> {
    for p in [PREFABS, ROOM, ENV] {
        if template.matches(p).count() != 1 {
            return Err(GatewayError::MissingPlaceholder(p.to_string()));
        }
    }
    let json = scene_to_json(scene);
    Ok(template
        .replacen(PREFABS, &json.prefabs_pretty(), 1)
        .replacen(ROOM, &room_info_text(&scene.room), 1)
        .replacen(ENV, &json.environment_pretty(), 1))
}

/// The hand-written example exchange placed after the system prompt.
pub fn one_shot_pair() -> (ChatMessage, ChatMessage) {
    (
        ChatMessage::user(ONE_SHOT_USER),
        ChatMessage::assistant(ONE_SHOT_ASSISTANT.trim_end()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use crate::runtime::{parse_line, Line};
    use crate::scene::{Prefab, RoomInfo};

    fn tiny_scene() -> Scene {
        let prefabs = vec![Prefab {
            prefab_id: "Chair".into(),
            description: "A chair.".into(),
            remarks: "Anchor: Bottom Center.".into(),
            dimensions: Vec3::new(0.5, 1.0, 0.5),
        }];
        let room = RoomInfo {
            center: Vec3::new(0.0, 0.0, 0.0),
            dimensions: Vec3::new(4.0, 3.0, 4.0),
        };
        Scene::new(prefabs, vec![], room).unwrap()
    }

    #[test]
    fn placeholders_are_substituted() {
        let out = render_system_prompt(SYSTEM_TASK2, &tiny_scene()).unwrap();
        assert!(!out.contains("<prefabs_info>") && !out.contains("<room_info>") && !out.contains("<env_objects>"));
        assert!(out.contains("\"prefab_id\": \"Chair\""));
        assert!(out.contains("Room Dimensions: (4.00, 3.00, 4.00)"));
        assert!(out.ends_with("cannot alter\n[]"));
    }

    #[test]
    fn task1_prompt_lacks_create_and_delete() {
        let out = render_system_prompt(SYSTEM_TASK1, &tiny_scene()).unwrap();
        assert!(!out.contains("CREATE("));
        assert!(!out.contains("DELETE("));
        assert!(out.contains("MOVE("));
    }

    #[test]
    fn placeholder_count_is_checked() {
        let scene = tiny_scene();
        assert_eq!(
            render_system_prompt("<room_info> <env_objects>", &scene),
            Err(GatewayError::MissingPlaceholder("<prefabs_info>".into()))
        );
        assert!(render_system_prompt("<prefabs_info><prefabs_info><room_info><env_objects>", &scene).is_err());
    }

    #[test]
    fn one_shot_is_well_formed() {
        let v: serde_json::Value = serde_json::from_str(ONE_SHOT_USER).unwrap();
        for key in [
            "player",
            "objects",
            "head_stay_frames",
            "hit_points",
            "drawing_lines",
            "user_request",
            "user_request_with_actions_inserted",
            "enabled_actions",
            "step_explain",
        ] {
            assert!(v.get(key).is_some(), "{key}");
        }
        let lines: Vec<_> = ONE_SHOT_ASSISTANT.lines().collect();
        assert_eq!(lines.len(), 11);
        for l in &lines {
            assert!(matches!(parse_line(l), Ok(Line::Call(_))), "{l}");
        }
        // Each non-EXPLAIN call is preceded by an explanation.
        for pair in lines.windows(2) {
            if !pair[1].starts_with("EXPLAIN") {
                assert!(pair[0].starts_with("EXPLAIN"), "{}", pair[1]);
            }
        }
    }
}
