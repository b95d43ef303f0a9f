//! Minimal rigid-transform math: 3-vectors, unit quaternions, poses.
//!
//! Everything here is plain `f64` with explicit serialization so the
//! canonical scene format stays byte-stable.

use serde::{Deserialize, Serialize};

/// Quaternion norm drift beyond which composition renormalizes.
pub const QUAT_DRIFT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }

    pub fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }

    pub fn scale(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn norm(self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Distance in the horizontal (xz) plane.
    pub fn lateral_distance(self, o: Vec3) -> f64 {
        let dx = self.x - o.x;
        let dz = self.z - o.z;
        (dx * dx + dz * dz).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn component(self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.x,
            Axis::Y => self.y,
            Axis::Z => self.z,
        }
    }

    pub fn with_component(mut self, axis: Axis, value: f64) -> Vec3 {
        match axis {
            Axis::X => self.x = value,
            Axis::Y => self.y = value,
            Axis::Z => self.z = value,
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Axis::X => write!(f, "x"),
            Axis::Y => write!(f, "y"),
            Axis::Z => write!(f, "z"),
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            other => Err(format!("unknown axis: {other}")),
        }
    }
}

/// Unit quaternion, stored (w, x, y, z).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quat {
    pub const IDENTITY: Quat = Quat { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Quat {
        let n = axis.norm();
        let half = angle * 0.5;
        let s = half.sin() / n;
        Quat {
            w: half.cos(),
            x: axis.x * s,
            y: axis.y * s,
            z: axis.z * s,
        }
    }

    pub fn norm(self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalized(self) -> Quat {
        let n = self.norm();
        Quat {
            w: self.w / n,
            x: self.x / n,
            y: self.y / n,
            z: self.z / n,
        }
    }

    /// Hamilton product; renormalizes when drift exceeds `QUAT_DRIFT_TOL`.
    pub fn mul(self, o: Quat) -> Quat {
        let q = Quat {
            w: self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            x: self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            y: self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            z: self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        };
        if (q.norm() - 1.0).abs() > QUAT_DRIFT_TOL {
            q.normalized()
        } else {
            q
        }
    }

    pub fn rotate(self, v: Vec3) -> Vec3 {
        // v' = q v q^-1 expanded via the cross-product form.
        let u = Vec3::new(self.x, self.y, self.z);
        let uv = cross(u, v);
        let uuv = cross(u, uv);
        v.add(uv.scale(2.0 * self.w)).add(uuv.scale(2.0))
    }

    /// Rotation angle between two unit quaternions, in radians.
    pub fn angle_to(self, o: Quat) -> f64 {
        let dot =
            (self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z).abs().min(1.0);
        2.0 * dot.acos()
    }

    pub fn is_unit(self) -> bool {
        (self.norm() - 1.0).abs() <= QUAT_DRIFT_TOL
    }
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    Vec3::new(
        a.y * b.z - a.z * b.y,
        a.z * b.x - a.x * b.z,
        a.x * b.y - a.y * b.x,
    )
}

/// Rigid pose: rotation then translation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub translation: Vec3,
    pub rotation: Quat,
}

impl Pose {
    pub const IDENTITY: Pose = Pose { translation: Vec3::ZERO, rotation: Quat::IDENTITY };

    pub fn new(translation: Vec3, rotation: Quat) -> Pose {
        Pose { translation, rotation }
    }

    /// `self` applied first, then `child` in `self`'s frame.
    pub fn compose(self, child: Pose) -> Pose {
        Pose {
            translation: self.translation.add(self.rotation.rotate(child.translation)),
            rotation: self.rotation.mul(child.rotation),
        }
    }

    pub fn apply(self, p: Vec3) -> Vec3 {
        self.translation.add(self.rotation.rotate(p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compose_pure_translations() {
        let a = Pose::new(Vec3::new(1.0, 0.0, 0.0), Quat::IDENTITY);
        let b = Pose::new(Vec3::new(0.0, 2.0, 0.0), Quat::IDENTITY);
        let c = a.compose(b);
        assert_eq!(c.translation, Vec3::new(1.0, 2.0, 0.0));
        assert_eq!(c.rotation, Quat::IDENTITY);
    }

    #[test]
    fn compose_rotation_then_translation() {
        // 90 degrees about z, then translate (1,0,0): lands at (0,1,0).
        let rot = Quat::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), std::f64::consts::FRAC_PI_2);
        let a = Pose::new(Vec3::ZERO, rot);
        let b = Pose::new(Vec3::new(1.0, 0.0, 0.0), Quat::IDENTITY);
        let c = a.compose(b);
        assert!((c.translation.x - 0.0).abs() < 1e-12);
        assert!((c.translation.y - 1.0).abs() < 1e-12);
        assert!((c.translation.z - 0.0).abs() < 1e-12);
        assert!(c.rotation.angle_to(rot) < 1e-12);
    }

    #[test]
    fn rotate_unit_vector() {
        let rot = Quat::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), std::f64::consts::FRAC_PI_2);
        let v = rot.rotate(Vec3::new(1.0, 0.0, 0.0));
        assert!((v.x).abs() < 1e-12);
        assert!((v.y - 1.0).abs() < 1e-12);
    }

    #[test]
    fn renormalization_keeps_unit_norm() {
        let mut q = Quat::from_axis_angle(Vec3::new(1.0, 1.0, 0.0), 0.3);
        for _ in 0..10_000 {
            q = q.mul(Quat::from_axis_angle(Vec3::new(0.0, 1.0, 0.0), 1e-3));
        }
        assert!(q.is_unit());
    }
}
