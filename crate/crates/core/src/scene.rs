//! Scene state: prefab catalog, manipulatable objects, static environment
//! and room bounds, plus the scene file format.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::format::{to_pretty, Fixed2Box, Fixed2Vec};
use crate::geometry::{Orientation, OrientationError, OrientedBox, Vec3};

/// Distance in front of the player at which new objects appear.
pub const SPAWN_DISTANCE: f64 = 1.5;
/// Half-thickness given to zero-extent environment boxes when ray casting.
pub const RAY_PAD: f64 = 0.01;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SceneError {
    #[error("unknown prefab {0:?}")]
    UnknownPrefab(String),
    #[error("unknown object {0:?}")]
    UnknownObject(String),
    #[error("duplicate prefab id {0:?}")]
    DuplicatePrefab(String),
    #[error("duplicate object id {0:?}")]
    DuplicateObjectId(String),
    #[error("duplicate object name {0:?}")]
    DuplicateObjectName(String),
    #[error("prefab {0:?} has non-positive dimensions")]
    InvalidDimensions(String),
    #[error("scale components must be positive")]
    InvalidScale,
    #[error("room dimensions must be positive")]
    InvalidRoom,
    #[error("target {0}: {1}")]
    InvalidTarget(usize, String),
    #[error(transparent)]
    Orientation(#[from] OrientationError),
}

/// Where a prefab's position sits on its bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Anchor {
    BottomCenter,
    BackCenter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prefab {
    pub prefab_id: String,
    pub description: String,
    pub remarks: String,
    pub dimensions: Vec3,
}

impl Prefab {
    /// Anchor convention read from the free-text remarks; bottom center
    /// unless the remarks mention the back surface.
    pub fn anchor(&self) -> Anchor {
        let remarks = self.remarks.to_ascii_lowercase();
        if remarks.contains("back surface") {
            Anchor::BackCenter
        } else {
            Anchor::BottomCenter
        }
    }

    /// Wall-mounted prefabs may face any direction; everything else keeps
    /// world up.
    pub fn up_locked(&self) -> bool {
        self.anchor() == Anchor::BottomCenter
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub object_id: String,
    pub prefab_id: String,
    pub display_name: String,
    pub position: Vec3,
    pub scale: Vec3,
    pub orientation: Orientation,
    pub boundary: OrientedBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentObject {
    pub name: String,
    pub boundary: OrientedBox,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoomInfo {
    pub center: Vec3,
    pub dimensions: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlayerPose {
    pub position: Vec3,
    pub forward: Vec3,
    pub right: Vec3,
}

impl Default for PlayerPose {
    fn default() -> Self {
        Self {
            position: Vec3::new(0.0, 1.6, 0.0),
            forward: Vec3::FORWARD,
            right: Vec3::RIGHT,
        }
    }
}

/// Computes an object's bounding box from its anchor, scale and orientation.
pub fn rebuild_boundary(obj: &SceneObject, prefab: &Prefab) -> OrientedBox {
    let size = prefab.dimensions.mul_elem(obj.scale);
    let o = obj.orientation;
    let central = match prefab.anchor() {
        Anchor::BottomCenter => obj.position + o.up * (size.y / 2.0),
        Anchor::BackCenter => obj.position + o.forward * (size.z / 2.0),
    };
    OrientedBox::new(central, size, o)
}

/// A ray intersection with scene geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayHit {
    /// Environment name or manipulatable object id.
    pub object: String,
    pub position: Vec3,
    pub normal: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    prefabs: Vec<Prefab>,
    objects: Vec<SceneObject>,
    environment: Vec<EnvironmentObject>,
    pub room: RoomInfo,
    pub player: PlayerPose,
    counters: BTreeMap<String, u32>,
    next_id: i64,
    revision: u64,
}

impl Scene {
    pub fn new(prefabs: Vec<Prefab>, environment: Vec<EnvironmentObject>, room: RoomInfo) -> Result<Self, SceneError> {
        if !(room.dimensions.x > 0.0 && room.dimensions.y > 0.0 && room.dimensions.z > 0.0) {
            return Err(SceneError::InvalidRoom);
        }
        let mut seen = std::collections::BTreeSet::new();
        for p in &prefabs {
            if !seen.insert(p.prefab_id.clone()) {
                return Err(SceneError::DuplicatePrefab(p.prefab_id.clone()));
            }
            let d = p.dimensions;
            if !(d.x > 0.0 && d.y > 0.0 && d.z > 0.0) {
                return Err(SceneError::InvalidDimensions(p.prefab_id.clone()));
            }
        }
        Ok(Self {
            prefabs,
            objects: Vec::new(),
            environment,
            room,
            player: PlayerPose::default(),
            counters: BTreeMap::new(),
            next_id: -1000,
            revision: 0,
        })
    }

    pub fn prefabs(&self) -> &[Prefab] {
        &self.prefabs
    }

    pub fn objects(&self) -> &[SceneObject] {
        &self.objects
    }

    pub fn environment(&self) -> &[EnvironmentObject] {
        &self.environment
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn prefab(&self, prefab_id: &str) -> Option<&Prefab> {
        self.prefabs.iter().find(|p| p.prefab_id == prefab_id)
    }

    pub fn object(&self, object_id: &str) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.object_id == object_id)
    }

    pub fn floor_level(&self) -> f64 {
        self.room.center.y
    }

    /// Resolves an object reference: exact object id, then exact display
    /// name, then a case-insensitive display name that matches exactly one
    /// object.
    pub fn resolve(&self, reference: &str) -> Option<&SceneObject> {
        if let Some(o) = self.object(reference) {
            return Some(o);
        }
        if let Some(o) = self.objects.iter().find(|o| o.display_name == reference) {
            return Some(o);
        }
        let mut matches = self
            .objects
            .iter()
            .filter(|o| o.display_name.eq_ignore_ascii_case(reference.trim()));
        match (matches.next(), matches.next()) {
            (Some(o), None) => Some(o),
            _ => None,
        }
    }

    fn allocate_id(&mut self) -> String {
        loop {
            let id = self.next_id.to_string();
            self.next_id -= 2;
            if self.object(&id).is_none() {
                return id;
            }
        }
    }

    fn allocate_name(&mut self, prefab_id: &str) -> String {
        let mut n = self.counters.get(prefab_id).copied().unwrap_or(0);
        let name = loop {
            n += 1;
            let name = format!("{prefab_id} {n}");
            if !self.objects.iter().any(|o| o.display_name == name) {
                break name;
            }
        };
        self.counters.insert(prefab_id.to_string(), n);
        name
    }

    /// Point in front of the player on the floor, facing back at the player.
    pub fn spawn_pose(&self) -> (Vec3, Orientation) {
        let ahead = self.player.forward.horizontal().normalized().unwrap_or(Vec3::FORWARD);
        let p = self.player.position + ahead * SPAWN_DISTANCE;
        let orientation = Orientation::facing(-ahead, true).unwrap_or_default();
        (Vec3::new(p.x, self.floor_level(), p.z), orientation)
    }

    /// Instantiates a prefab at the given anchor point. Returns the new id.
    pub fn create(&mut self, prefab_id: &str, position: Vec3, orientation: Orientation) -> Result<String, SceneError> {
        let prefab = self
            .prefab(prefab_id)
            .ok_or_else(|| SceneError::UnknownPrefab(prefab_id.to_string()))?
            .clone();
        let orientation = if prefab.up_locked() {
            Orientation::facing(orientation.forward, true)?
        } else {
            orientation
        };
        let object_id = self.allocate_id();
        let display_name = self.allocate_name(prefab_id);
        let mut obj = SceneObject {
            object_id: object_id.clone(),
            prefab_id: prefab.prefab_id.clone(),
            display_name,
            position,
            scale: Vec3::ONE,
            orientation,
            boundary: OrientedBox::axis_aligned(position, Vec3::ZERO),
        };
        obj.boundary = rebuild_boundary(&obj, &prefab);
        self.objects.push(obj);
        self.revision += 1;
        Ok(object_id)
    }

    /// Inserts an object loaded from a scene file, keeping its id and name.
    fn insert_loaded(&mut self, mut obj: SceneObject) -> Result<(), SceneError> {
        let prefab = self
            .prefab(&obj.prefab_id)
            .ok_or_else(|| SceneError::UnknownPrefab(obj.prefab_id.clone()))?
            .clone();
        if self.object(&obj.object_id).is_some() {
            return Err(SceneError::DuplicateObjectId(obj.object_id));
        }
        if self.objects.iter().any(|o| o.display_name == obj.display_name) {
            return Err(SceneError::DuplicateObjectName(obj.display_name));
        }
        if !(obj.scale.x > 0.0 && obj.scale.y > 0.0 && obj.scale.z > 0.0) {
            return Err(SceneError::InvalidScale);
        }
        obj.boundary = rebuild_boundary(&obj, &prefab);
        *self.counters.entry(obj.prefab_id.clone()).or_insert(0) += 1;
        self.objects.push(obj);
        Ok(())
    }

    fn with_object<F>(&mut self, object_id: &str, f: F) -> Result<(), SceneError>
    where
        F: FnOnce(&mut SceneObject, &Prefab) -> Result<(), SceneError>,
    {
        let idx = self
            .objects
            .iter()
            .position(|o| o.object_id == object_id)
            .ok_or_else(|| SceneError::UnknownObject(object_id.to_string()))?;
        let prefab_id = self.objects[idx].prefab_id.clone();
        let prefab = self
            .prefab(&prefab_id)
            .ok_or(SceneError::UnknownPrefab(prefab_id))?
            .clone();
        let obj = &mut self.objects[idx];
        f(obj, &prefab)?;
        obj.boundary = rebuild_boundary(obj, &prefab);
        self.revision += 1;
        Ok(())
    }

    pub fn set_position(&mut self, object_id: &str, position: Vec3) -> Result<(), SceneError> {
        self.with_object(object_id, |o, _| {
            o.position = position;
            Ok(())
        })
    }

    /// Points the object along `dir`, honouring the prefab's up lock.
    pub fn set_forward(&mut self, object_id: &str, dir: Vec3) -> Result<(), SceneError> {
        self.with_object(object_id, |o, p| {
            o.orientation = Orientation::facing(dir, p.up_locked())?;
            Ok(())
        })
    }

    pub fn set_orientation(&mut self, object_id: &str, orientation: Orientation) -> Result<(), SceneError> {
        self.with_object(object_id, |o, _| {
            o.orientation = orientation;
            Ok(())
        })
    }

    pub fn set_scale(&mut self, object_id: &str, scale: Vec3) -> Result<(), SceneError> {
        if !(scale.x > 0.0 && scale.y > 0.0 && scale.z > 0.0) || !scale.is_finite() {
            return Err(SceneError::InvalidScale);
        }
        self.with_object(object_id, |o, _| {
            o.scale = scale;
            Ok(())
        })
    }

    pub fn delete(&mut self, object_id: &str) -> Result<SceneObject, SceneError> {
        let idx = self
            .objects
            .iter()
            .position(|o| o.object_id == object_id)
            .ok_or_else(|| SceneError::UnknownObject(object_id.to_string()))?;
        self.revision += 1;
        Ok(self.objects.remove(idx))
    }

    /// Nearest intersection of a ray with environment or object boxes.
    pub fn raycast(&self, origin: Vec3, dir: Vec3) -> Option<RayHit> {
        let dir = dir.normalized()?;
        let env = self.environment.iter().map(|e| (e.name.as_str(), &e.boundary));
        let objs = self.objects.iter().map(|o| (o.object_id.as_str(), &o.boundary));
        env.chain(objs)
            .filter_map(|(name, b)| b.ray_hit(origin, dir, RAY_PAD).map(|(t, n)| (t, name, n)))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(t, name, normal)| RayHit {
                object: name.to_string(),
                position: origin + dir * t,
                normal,
            })
    }

    /// Loads a scene document.
    pub fn from_file(file: &SceneFile) -> Result<Scene, SceneError> {
        let environment = file
            .environment
            .iter()
            .map(|e| {
                Ok(EnvironmentObject {
                    name: e.name.clone(),
                    boundary: e.boundary.to_box()?,
                })
            })
            .collect::<Result<Vec<_>, SceneError>>()?;
        let mut scene = Scene::new(file.prefabs.clone(), environment, file.room)?;
        if let Some(p) = file.player {
            scene.player = p;
        }
        for spec in &file.objects {
            let prefab_id = match &spec.prefab_id {
                Some(id) => id.clone(),
                None => infer_prefab_id(&spec.object_name, &scene.prefabs)
                    .ok_or_else(|| SceneError::UnknownPrefab(spec.object_name.clone()))?,
            };
            let up_locked = scene
                .prefab(&prefab_id)
                .ok_or_else(|| SceneError::UnknownPrefab(prefab_id.clone()))?
                .up_locked();
            let orientation = match &spec.boundary {
                Some(b) => Orientation::facing(b.forward, up_locked)?,
                None => Orientation::IDENTITY,
            };
            scene.insert_loaded(SceneObject {
                object_id: spec.object_id.clone(),
                prefab_id,
                display_name: spec.object_name.clone(),
                position: spec.position,
                scale: spec.scale.unwrap_or(Vec3::ONE),
                orientation,
                boundary: OrientedBox::axis_aligned(spec.position, Vec3::ZERO),
            })?;
        }
        Ok(scene)
    }

    /// Full-precision scene document for this state (targets not included).
    pub fn to_file(&self) -> SceneFile {
        SceneFile {
            description: None,
            room: self.room,
            player: Some(self.player),
            prefabs: self.prefabs.clone(),
            environment: self
                .environment
                .iter()
                .map(|e| EnvironmentSpec {
                    name: e.name.clone(),
                    boundary: BoxSpec::from_box(&e.boundary),
                })
                .collect(),
            objects: self.objects.iter().map(object_spec).collect(),
            targets: Vec::new(),
        }
    }
}

/// Full-precision record of one object, as stored in scene files.
pub fn object_spec(o: &SceneObject) -> ObjectSpec {
    ObjectSpec {
        object_id: o.object_id.clone(),
        object_name: o.display_name.clone(),
        prefab_id: Some(o.prefab_id.clone()),
        position: o.position,
        scale: Some(o.scale),
        boundary: Some(BoxSpec::from_box(&o.boundary)),
    }
}

/// Strips a trailing ordinal ("Chair 2" → "Chair") and looks the rest up.
fn infer_prefab_id(name: &str, prefabs: &[Prefab]) -> Option<String> {
    if let Some(p) = prefabs.iter().find(|p| p.prefab_id == name) {
        return Some(p.prefab_id.clone());
    }
    let base = name.trim_end_matches(|c: char| c.is_ascii_digit()).trim_end();
    prefabs
        .iter()
        .find(|p| p.prefab_id == base)
        .map(|p| p.prefab_id.clone())
}

// ---------------------------------------------------------------------------
// LLM-facing JSON documents

#[derive(Debug, Clone, Serialize)]
pub struct ObjectEntry {
    pub object_id: String,
    pub object_name: String,
    pub position: Fixed2Vec,
    pub scale: Fixed2Vec,
    pub boundary: Fixed2Box,
}

#[derive(Serialize)]
pub struct EnvironmentEntry<'a> {
    pub name: &'a str,
    pub boundary: Fixed2Box,
}

#[derive(Serialize)]
pub struct PrefabEntry<'a> {
    pub prefab_id: &'a str,
    pub description: &'a str,
    pub remarks: &'a str,
    pub dimensions: Fixed2Vec,
}

#[derive(Serialize)]
pub struct PrefabList<'a> {
    pub prefabs: Vec<PrefabEntry<'a>>,
}

/// The three serialisations of a scene: manipulatable objects,
/// environment objects and the prefab catalog.
pub struct SceneJson<'a> {
    pub objects: Vec<ObjectEntry>,
    pub environment: Vec<EnvironmentEntry<'a>>,
    pub prefabs: PrefabList<'a>,
}

impl SceneJson<'_> {
    pub fn objects_pretty(&self) -> String {
        to_pretty(&self.objects, 2)
    }

    pub fn environment_pretty(&self) -> String {
        to_pretty(&self.environment, 4)
    }

    pub fn prefabs_pretty(&self) -> String {
        to_pretty(&self.prefabs, 2)
    }
}

pub fn object_entry(o: &SceneObject) -> ObjectEntry {
    ObjectEntry {
        object_id: o.object_id.clone(),
        object_name: o.display_name.clone(),
        position: Fixed2Vec(o.position),
        scale: Fixed2Vec(o.scale),
        boundary: Fixed2Box(o.boundary),
    }
}

pub fn scene_to_json(scene: &Scene) -> SceneJson<'_> {
    SceneJson {
        objects: scene.objects.iter().map(object_entry).collect(),
        environment: scene
            .environment
            .iter()
            .map(|e| EnvironmentEntry {
                name: &e.name,
                boundary: Fixed2Box(e.boundary),
            })
            .collect(),
        prefabs: PrefabList {
            prefabs: scene
                .prefabs
                .iter()
                .map(|p| PrefabEntry {
                    prefab_id: &p.prefab_id,
                    description: &p.description,
                    remarks: &p.remarks,
                    dimensions: Fixed2Vec(p.dimensions),
                })
                .collect(),
        },
    }
}

/// "Room Center: (..)\nRoom Dimensions: (..)\n"
pub fn room_info_text(room: &RoomInfo) -> String {
    use crate::format::fixed2;
    let v = |p: Vec3| format!("({}, {}, {})", fixed2(p.x), fixed2(p.y), fixed2(p.z));
    format!(
        "Room Center: {}\nRoom Dimensions: {}\n",
        v(room.center),
        v(room.dimensions)
    )
}

// ---------------------------------------------------------------------------
// Scene file format

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec {
    #[serde(rename = "Central")]
    pub central: Vec3,
    #[serde(rename = "Size")]
    pub size: Vec3,
    #[serde(rename = "Forward")]
    pub forward: Vec3,
    #[serde(rename = "Up", default = "up", skip_serializing_if = "Option::is_none")]
    pub up: Option<Vec3>,
    #[serde(rename = "Right", default, skip_serializing_if = "Option::is_none")]
    pub right: Option<Vec3>,
}

fn up() -> Option<Vec3> {
    Some(Vec3::UP)
}

impl BoxSpec {
    pub fn from_box(b: &OrientedBox) -> Self {
        Self {
            central: b.central,
            size: b.size,
            forward: b.forward,
            up: Some(b.up),
            right: Some(b.right),
        }
    }

    /// Rebuilds an orthonormal box; the stored forward and up are
    /// re-orthogonalised since files carry rounded directions.
    pub fn to_box(&self) -> Result<OrientedBox, SceneError> {
        let forward = self.forward.normalized().ok_or(OrientationError::ZeroDirection)?;
        let up_hint = self.up.unwrap_or(Vec3::UP);
        let up = (up_hint - forward * forward.dot(up_hint))
            .normalized()
            .ok_or(OrientationError::ZeroDirection)?;
        Ok(OrientedBox::new(
            self.central,
            self.size,
            Orientation {
                forward,
                up,
                right: up.cross(forward),
            },
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    pub name: String,
    pub boundary: BoxSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub object_id: String,
    pub object_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefab_id: Option<String>,
    pub position: Vec3,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<Vec3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<BoxSpec>,
}

/// Binds a goal pose to the `index`-th instance of a prefab (scene order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub prefab_id: String,
    pub index: usize,
    pub goal: BoxSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub room: RoomInfo,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub player: Option<PlayerPose>,
    pub prefabs: Vec<Prefab>,
    #[serde(default)]
    pub environment: Vec<EnvironmentSpec>,
    #[serde(default)]
    pub objects: Vec<ObjectSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub targets: Vec<TargetSpec>,
}

impl SceneFile {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        to_pretty(self, 2)
    }
}
