//! Rigid-body primitives: unit quaternions, poses and wrenches.
//!
//! Quaternions are stored as `(w, x, y, z)` with the Hamilton product and are
//! always canonicalized to `w >= 0`. The logarithm uses the half-angle
//! convention: for `q = (cos θ/2, u sin θ/2)`, `log(q) = (θ/2) u`.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::Vector3;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

/// Norms below this are treated as the identity rotation in `log`/`exp`.
const SMALL_ANGLE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("quat_exp argument norm {0} is outside [0, pi)")]
    ExpDomain(f64),
    #[error("quaternion has zero or non-finite norm")]
    DegenerateQuaternion,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

/// Unit quaternion in `(w, x, y, z)` order, canonicalized to `w >= 0`.
#[derive(Clone, Copy, PartialEq)]
pub struct UnitQuaternion {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl UnitQuaternion {
    pub const IDENTITY: UnitQuaternion = UnitQuaternion {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    /// Normalizes and canonicalizes the given components.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Result<Self, GeometryError> {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !n.is_finite() || n < 1e-300 {
            return Err(GeometryError::DegenerateQuaternion);
        }
        let s = if w < 0.0 { -1.0 / n } else { 1.0 / n };
        Ok(Self {
            w: w * s,
            x: x * s,
            y: y * s,
            z: z * s,
        })
    }

    fn from_raw(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self::new(w, x, y, z).expect("product of unit quaternions is never degenerate")
    }

    /// Rotation of `angle` radians about `axis` (need not be normalized).
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let n = axis.norm();
        if n < SMALL_ANGLE {
            return Self::IDENTITY;
        }
        let (s, c) = (angle / 2.0).sin_cos();
        let u = axis / n;
        Self::from_raw(c, u.x * s, u.y * s, u.z * s)
    }

    /// Rotation by the full-angle rotation vector `rv` (angle `|rv|` about `rv/|rv|`).
    pub fn from_rotation_vector(rv: &Vec3) -> Self {
        Self::from_axis_angle(rv, rv.norm())
    }

    /// Shortest rotation taking unit vector `from` onto unit vector `to`.
    pub fn rotation_between(from: &Vec3, to: &Vec3) -> Self {
        let a = from.normalize();
        let b = to.normalize();
        let d = a.dot(&b);
        if d < -1.0 + 1e-12 {
            // antiparallel: any perpendicular axis works
            let mut perp = a.cross(&Vec3::x());
            if perp.norm() < 1e-6 {
                perp = a.cross(&Vec3::y());
            }
            return Self::from_axis_angle(&perp, PI);
        }
        let c = a.cross(&b);
        Self::from_raw(1.0 + d, c.x, c.y, c.z)
    }

    pub fn w(&self) -> f64 {
        self.w
    }
    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn vector(&self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Hamilton product `self * rhs`.
    pub fn mul(&self, rhs: &Self) -> Self {
        let (a, b) = (self, rhs);
        Self::from_raw(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }

    pub fn conj(&self) -> Self {
        Self::from_raw(self.w, -self.x, -self.y, -self.z)
    }

    /// Rotates a vector by this quaternion.
    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        let u = self.vector();
        let t = 2.0 * u.cross(v);
        v + self.w * t + u.cross(&t)
    }

    /// Half-angle logarithm.
    pub fn log(&self) -> Vec3 {
        let u = self.vector();
        let n = u.norm();
        if n < SMALL_ANGLE {
            return u / self.w;
        }
        let half = n.atan2(self.w);
        u * (half / n)
    }

    /// Half-angle exponential; `|v|` must lie in `[0, pi)`.
    pub fn exp(v: &Vec3) -> Result<Self, GeometryError> {
        let n = v.norm();
        if !n.is_finite() {
            return Err(GeometryError::NonFinite("quat_exp argument"));
        }
        if n >= PI {
            return Err(GeometryError::ExpDomain(n));
        }
        if n < SMALL_ANGLE {
            return Ok(Self::from_raw(1.0, v.x, v.y, v.z));
        }
        let (s, c) = n.sin_cos();
        let k = s / n;
        Ok(Self::from_raw(c, v.x * k, v.y * k, v.z * k))
    }

    /// Full-angle rotation vector of `self * other⁻¹`, i.e. `2·log(self ∘ other̄)`.
    pub fn error_to(&self, other: &Self) -> Vec3 {
        2.0 * self.mul(&other.conj()).log()
    }

    /// Rotation angle in `[0, pi]`.
    pub fn angle(&self) -> f64 {
        2.0 * self.vector().norm().atan2(self.w)
    }

    /// Geodesic angle between two orientations.
    pub fn angle_to(&self, other: &Self) -> f64 {
        self.mul(&other.conj()).angle()
    }

    /// Spherical-linear interpolation, `u = 0` gives `self`, `u = 1` gives `other`.
    pub fn slerp(&self, other: &Self, u: f64) -> Self {
        let rel = self.conj().mul(other);
        let step = Self::exp(&(rel.log() * u)).expect("|log| <= pi/2 on the canonical hemisphere");
        self.mul(&step)
    }
}

impl Default for UnitQuaternion {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl fmt::Debug for UnitQuaternion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "UnitQuaternion({}, {}, {}, {})", self.w, self.x, self.y, self.z)
    }
}

impl Serialize for UnitQuaternion {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_array().serialize(s)
    }
}

impl<'de> Deserialize<'de> for UnitQuaternion {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [w, x, y, z] = <[f64; 4]>::deserialize(d)?;
        // Exact storage when already unit and canonical keeps save/load bit-exact.
        let n2 = w * w + x * x + y * y + z * z;
        if w >= 0.0 && (n2 - 1.0).abs() < 1e-12 {
            return Ok(Self { w, x, y, z });
        }
        Self::new(w, x, y, z).map_err(serde::de::Error::custom)
    }
}

pub fn quat_log(q: &UnitQuaternion) -> Vec3 {
    q.log()
}

pub fn quat_exp(v: &Vec3) -> Result<UnitQuaternion, GeometryError> {
    UnitQuaternion::exp(v)
}

pub fn quat_mul(a: &UnitQuaternion, b: &UnitQuaternion) -> UnitQuaternion {
    a.mul(b)
}

pub fn quat_conj(q: &UnitQuaternion) -> UnitQuaternion {
    q.conj()
}

/// Position in meters plus orientation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    #[serde(with = "vec3_array")]
    pub position: Vec3,
    pub orientation: UnitQuaternion,
}

impl Pose {
    pub fn new(position: Vec3, orientation: UnitQuaternion) -> Self {
        Self {
            position,
            orientation,
        }
    }

    pub fn from_position(position: Vec3) -> Self {
        Self::new(position, UnitQuaternion::IDENTITY)
    }

    /// Composition `self ∘ other` (apply `other` in the frame of `self`).
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose::new(
            self.position + self.orientation.rotate(&other.position),
            self.orientation.mul(&other.orientation),
        )
    }

    pub fn inverse(&self) -> Pose {
        let q = self.orientation.conj();
        Pose::new(-q.rotate(&self.position), q)
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.position + self.orientation.rotate(p)
    }

    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.orientation.rotate(v)
    }

    /// Linear interpolation of position, slerp of orientation.
    pub fn interpolate(&self, other: &Pose, u: f64) -> Pose {
        Pose::new(
            self.position + (other.position - self.position) * u,
            self.orientation.slerp(&other.orientation, u),
        )
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.orientation.to_array().iter().all(|v| v.is_finite())
    }
}

/// Force in newtons and torque in newton-meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Wrench {
    #[serde(with = "vec3_array")]
    pub force: Vec3,
    #[serde(with = "vec3_array")]
    pub torque: Vec3,
}

impl Wrench {
    pub const ZERO: Wrench = Wrench {
        force: Vec3::new(0.0, 0.0, 0.0),
        torque: Vec3::new(0.0, 0.0, 0.0),
    };

    pub fn new(force: Vec3, torque: Vec3) -> Result<Self, GeometryError> {
        if force.iter().chain(torque.iter()).all(|v| v.is_finite()) {
            Ok(Self { force, torque })
        } else {
            Err(GeometryError::NonFinite("wrench"))
        }
    }

    pub fn axis(&self, i: usize) -> f64 {
        if i < 3 {
            self.force[i]
        } else {
            self.torque[i - 3]
        }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.force.x,
            self.force.y,
            self.force.z,
            self.torque.x,
            self.torque.y,
            self.torque.z,
        ]
    }
}

pub(crate) mod vec3_array {
    use super::Vec3;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Vec3, s: S) -> Result<S::Ok, S::Error> {
        [v.x, v.y, v.z].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec3, D::Error> {
        let a = <[f64; 3]>::deserialize(d)?;
        Ok(Vec3::new(a[0], a[1], a[2]))
    }
}
