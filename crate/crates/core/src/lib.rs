//! Speech and gesture driven scene manipulation.
//!
//! The crate is organised along the request loop:
//!
//! * [`geometry`] and [`scene`] hold the oriented-bounding-box scene model
//!   and its JSON documents.
//! * [`capture`] fuses timed words, head poses and pointing/lining cues into
//!   the per-request user prompt.
//! * [`gateway`] renders prompts, keeps the sliding context window and
//!   streams completions line by line.
//! * [`runtime`] parses and executes the model's line-wise API calls.
//! * [`voice`] is the deterministic keyword grammar used without a model.
//! * [`session`] ties the loop together, records and replays traces, scores
//!   task metrics and serves the wire protocol.

pub mod capture;
pub mod format;
pub mod gateway;
pub mod geometry;
pub mod runtime;
pub mod scene;
pub mod server;
pub mod session;
pub mod voice;

pub use geometry::{avg_corner_distance, in_frustum, Orientation, OrientedBox, Vec3};
pub use scene::{scene_to_json, Prefab, Scene, SceneFile, SceneObject};
