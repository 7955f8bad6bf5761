//! Vectors, orientations and oriented bounding boxes.
//!
//! Frame convention: x is right, y is up, z is forward. For every
//! orientation `right = up × forward`.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use serde::{Deserialize, Deserializer, Serialize};

/// Tolerance used for unit-length and orthogonality checks.
pub const UNIT_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const ONE: Vec3 = Vec3::new(1.0, 1.0, 1.0);
    pub const UP: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const RIGHT: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const FORWARD: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn length(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).length()
    }

    /// Unit vector in the same direction, or `None` for a (near) zero vector.
    pub fn normalized(self) -> Option<Vec3> {
        let len = self.length();
        if len <= 1e-12 || !len.is_finite() {
            None
        } else {
            Some(self / len)
        }
    }

    /// Component-wise product.
    pub fn mul_elem(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x * o.x, self.y * o.y, self.z * o.z)
    }

    /// Drops the vertical component.
    pub fn horizontal(self) -> Vec3 {
        Vec3::new(self.x, 0.0, self.z)
    }

    pub fn is_unit(self) -> bool {
        (self.length() - 1.0).abs() <= UNIT_EPS
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Angle between two vectors in degrees; 0 if either is zero.
    pub fn angle_deg(self, o: Vec3) -> f64 {
        match (self.normalized(), o.normalized()) {
            (Some(a), Some(b)) => a.dot(b).clamp(-1.0, 1.0).acos().to_degrees(),
            _ => 0.0,
        }
    }

    /// Rodrigues rotation of `self` about a unit `axis` by `angle` radians.
    pub fn rotated_about(self, axis: Vec3, angle: f64) -> Vec3 {
        let (s, c) = angle.sin_cos();
        self * c + axis.cross(self) * s + axis * (axis.dot(self) * (1.0 - c))
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

// Scene documents carry numbers as two-decimal strings while traces carry
// plain JSON numbers, so both are accepted on input.
impl<'de> Deserialize<'de> for Vec3 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            #[serde(deserialize_with = "lenient_f64")]
            x: f64,
            #[serde(deserialize_with = "lenient_f64")]
            y: f64,
            #[serde(deserialize_with = "lenient_f64")]
            z: f64,
        }
        let r = Raw::deserialize(d)?;
        Ok(Vec3::new(r.x, r.y, r.z))
    }
}

/// Deserializes a number given either as a JSON number or a numeric string.
pub fn lenient_f64<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum NumOrStr {
        Num(f64),
        Str(String),
    }
    match NumOrStr::deserialize(d)? {
        NumOrStr::Num(v) => Ok(v),
        NumOrStr::Str(s) => s
            .trim()
            .parse::<f64>()
            .map_err(|e| serde::de::Error::custom(format!("invalid number {s:?}: {e}"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum OrientationError {
    #[error("direction vector is zero after projection")]
    ZeroDirection,
}

/// Orthonormal forward/up/right triad.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Orientation {
    pub forward: Vec3,
    pub up: Vec3,
    pub right: Vec3,
}

impl Default for Orientation {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Orientation {
    pub const IDENTITY: Orientation = Orientation {
        forward: Vec3::FORWARD,
        up: Vec3::UP,
        right: Vec3::RIGHT,
    };

    /// Builds an orientation facing `dir`.
    ///
    /// With `up_locked` the direction is projected onto the horizontal plane
    /// and `up` stays world up. Otherwise `up` is world up orthogonalised
    /// against the forward direction (world forward when looking straight
    /// up or down).
    pub fn facing(dir: Vec3, up_locked: bool) -> Result<Orientation, OrientationError> {
        if up_locked {
            let forward = dir.horizontal().normalized().ok_or(OrientationError::ZeroDirection)?;
            return Ok(Orientation {
                forward,
                up: Vec3::UP,
                right: Vec3::UP.cross(forward),
            });
        }
        let forward = dir.normalized().ok_or(OrientationError::ZeroDirection)?;
        let up = (Vec3::UP - forward * forward.dot(Vec3::UP))
            .normalized()
            .or_else(|| (Vec3::FORWARD - forward * forward.dot(Vec3::FORWARD)).normalized())
            .ok_or(OrientationError::ZeroDirection)?;
        Ok(Orientation {
            forward,
            up,
            right: up.cross(forward),
        })
    }

    /// Turns about world up; positive angles swing forward toward right.
    pub fn yawed(self, radians: f64) -> Orientation {
        Orientation {
            forward: self.forward.rotated_about(Vec3::UP, radians),
            up: self.up.rotated_about(Vec3::UP, radians),
            right: self.right.rotated_about(Vec3::UP, radians),
        }
    }

    /// Tilts about the local right axis; positive angles swing forward toward up.
    pub fn pitched(self, radians: f64) -> Orientation {
        let (s, c) = radians.sin_cos();
        Orientation {
            forward: self.forward * c + self.up * s,
            up: self.up * c - self.forward * s,
            right: self.right,
        }
    }

    pub fn is_orthonormal(&self) -> bool {
        self.forward.is_unit()
            && self.up.is_unit()
            && self.right.is_unit()
            && self.forward.dot(self.up).abs() <= UNIT_EPS
            && self.forward.dot(self.right).abs() <= UNIT_EPS
            && self.up.dot(self.right).abs() <= UNIT_EPS
    }
}

/// Cuboid with arbitrary orientation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox {
    pub central: Vec3,
    /// Edge lengths along right (x), up (y) and forward (z).
    pub size: Vec3,
    pub forward: Vec3,
    pub up: Vec3,
    pub right: Vec3,
}

impl OrientedBox {
    pub fn new(central: Vec3, size: Vec3, orientation: Orientation) -> Self {
        Self {
            central,
            size,
            forward: orientation.forward,
            up: orientation.up,
            right: orientation.right,
        }
    }

    pub fn axis_aligned(central: Vec3, size: Vec3) -> Self {
        Self::new(central, size, Orientation::IDENTITY)
    }

    pub fn orientation(&self) -> Orientation {
        Orientation {
            forward: self.forward,
            up: self.up,
            right: self.right,
        }
    }

    /// The eight corners in canonical order: sign patterns over
    /// (right, up, forward) of −−−, −−+, −+−, −++, +−−, +−+, ++−, +++.
    pub fn corners(&self) -> [Vec3; 8] {
        let hr = self.right * (self.size.x / 2.0);
        let hu = self.up * (self.size.y / 2.0);
        let hf = self.forward * (self.size.z / 2.0);
        let mut out = [Vec3::ZERO; 8];
        for (i, corner) in out.iter_mut().enumerate() {
            let sr = if i & 4 != 0 { 1.0 } else { -1.0 };
            let su = if i & 2 != 0 { 1.0 } else { -1.0 };
            let sf = if i & 1 != 0 { 1.0 } else { -1.0 };
            *corner = self.central + hr * sr + hu * su + hf * sf;
        }
        out
    }

    /// Ray/box intersection via the slab method in the box frame.
    ///
    /// Zero-thickness extents are padded by `pad` on each side. Returns the
    /// hit distance along the ray and the outward face normal.
    pub fn ray_hit(&self, origin: Vec3, dir: Vec3, pad: f64) -> Option<(f64, Vec3)> {
        let rel = origin - self.central;
        let axes = [self.right, self.up, self.forward];
        let halves = [self.size.x / 2.0, self.size.y / 2.0, self.size.z / 2.0];
        let mut t_min = f64::NEG_INFINITY;
        let mut t_max = f64::INFINITY;
        let mut normal = Vec3::ZERO;
        for (axis, half) in axes.into_iter().zip(halves) {
            let half = half.max(pad);
            let o = rel.dot(axis);
            let d = dir.dot(axis);
            if d.abs() < 1e-12 {
                if o.abs() > half {
                    return None;
                }
                continue;
            }
            let mut t0 = (-half - o) / d;
            let mut t1 = (half - o) / d;
            // Entering through the face whose outward normal opposes the ray.
            let n = -axis * d.signum();
            if t0 > t1 {
                std::mem::swap(&mut t0, &mut t1);
            }
            if t0 > t_min {
                t_min = t0;
                normal = n;
            }
            if t1 < t_max {
                t_max = t1;
            }
            if t_min > t_max {
                return None;
            }
        }
        if t_max < 0.0 {
            return None;
        }
        if t_min < 0.0 {
            // Origin inside the box.
            return Some((0.0, -dir.normalized().unwrap_or(Vec3::UP)));
        }
        Some((t_min, normal))
    }
}

/// Mean distance between canonically paired corners of two boxes.
pub fn avg_corner_distance(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let ca = a.corners();
    let cb = b.corners();
    ca.iter().zip(cb.iter()).map(|(p, q)| p.distance(*q)).sum::<f64>() / 8.0
}

/// Result of a view-frustum test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrustumHit {
    pub visible: bool,
    /// Angle from the view axis to the box center divided by the horizontal
    /// half field of view. 0 at dead center.
    pub screen_center_distance: f64,
}

/// Tests whether the box center lies inside the head's view frustum.
///
/// `head_right` completes the view frame; the head's up is
/// `forward × right`.
pub fn in_frustum(
    b: &OrientedBox,
    head_position: Vec3,
    head_forward: Vec3,
    head_right: Vec3,
    fov_h_deg: f64,
    fov_v_deg: f64,
) -> FrustumHit {
    let d = b.central - head_position;
    let along = d.dot(head_forward);
    let angle = head_forward.angle_deg(d);
    let screen_center_distance = angle / (fov_h_deg / 2.0);
    if along <= 0.0 {
        return FrustumHit {
            visible: false,
            screen_center_distance,
        };
    }
    let head_up = head_forward.cross(head_right);
    let h = d.dot(head_right).atan2(along).to_degrees();
    let v = d.dot(head_up).atan2(along).to_degrees();
    FrustumHit {
        visible: h.abs() <= fov_h_deg / 2.0 && v.abs() <= fov_v_deg / 2.0,
        screen_center_distance,
    }
}
