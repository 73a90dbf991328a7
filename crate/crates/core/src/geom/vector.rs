use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// Cartesian 3-vector in meters (or m/s for velocities).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Self = Self::new(0.0, 0.0, 0.0);
    pub const FORWARD: Self = Self::new(1.0, 0.0, 0.0);
    pub const LEFT: Self = Self::new(0.0, 1.0, 0.0);
    pub const UP: Self = Self::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, other: Self) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Self) -> Self {
        Self::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, other: Self) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Linear interpolation, `s = 0` gives `self`.
    pub fn lerp(self, other: Self, s: f64) -> Self {
        self + (other - self) * s
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        v.to_array()
    }
}

impl Add for Vec3 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

/// Rotation quaternion stored as (w, x, y, z).
///
/// Constructors normalize; a `Quat` obtained through the public API always
/// has unit norm to within rounding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct Quat {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl Quat {
    pub const IDENTITY: Self = Self {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    /// Normalizing constructor. Returns `None` for a zero or non-finite input.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Option<Self> {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !n.is_finite() || n == 0.0 {
            return None;
        }
        Some(Self {
            w: w / n,
            x: x / n,
            y: y / n,
            z: z / n,
        })
    }

    /// Rotation by `angle` radians about `axis` (right-hand rule).
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let n = axis.norm();
        let (s, c) = (0.5 * angle).sin_cos();
        let a = axis * (1.0 / n);
        Self::new(c, a.x * s, a.y * s, a.z * s).unwrap_or(Self::IDENTITY)
    }

    pub fn components(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn norm(self) -> f64 {
        let [w, x, y, z] = self.components();
        (w * w + x * x + y * y + z * z).sqrt()
    }

    pub fn conjugate(self) -> Self {
        Self {
            w: self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    /// Applies the rotation to `v` (computes q v q*).
    pub fn rotate(self, v: Vec3) -> Vec3 {
        let u = Vec3::new(self.x, self.y, self.z);
        let t = u.cross(v) * 2.0;
        v + t * self.w + u.cross(t)
    }

    /// Normalized linear interpolation along the shorter arc.
    pub fn nlerp(self, other: Self, s: f64) -> Self {
        let a = self.components();
        let mut b = other.components();
        let dot: f64 = a.iter().zip(&b).map(|(p, q)| p * q).sum();
        if dot < 0.0 {
            b.iter_mut().for_each(|c| *c = -*c);
        }
        let m: Vec<f64> = a.iter().zip(&b).map(|(p, q)| p + (q - p) * s).collect();
        Self::new(m[0], m[1], m[2], m[3]).unwrap_or(self)
    }
}

impl Default for Quat {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl TryFrom<[f64; 4]> for Quat {
    type Error = String;
    fn try_from(a: [f64; 4]) -> Result<Self, String> {
        Quat::new(a[0], a[1], a[2], a[3]).ok_or_else(|| format!("orientation {a:?} is zero or non-finite"))
    }
}

impl From<Quat> for [f64; 4] {
    fn from(q: Quat) -> Self {
        q.components()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn construction_normalizes() {
        let q = Quat::new(2.0, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(q, Quat::IDENTITY);
        let q = Quat::new(1.0, 2.0, 3.0, 4.0).unwrap();
        assert!((q.norm() - 1.0).abs() < 1e-12);
        assert!(Quat::new(0.0, 0.0, 0.0, 0.0).is_none());
        assert!(Quat::new(f64::NAN, 0.0, 0.0, 1.0).is_none());
    }

    #[test]
    fn quarter_turn_about_z() {
        let q = Quat::from_axis_angle(Vec3::UP, FRAC_PI_2);
        let v = q.rotate(Vec3::FORWARD);
        assert!((v - Vec3::LEFT).norm() < 1e-12);
        let back = q.conjugate().rotate(v);
        assert!((back - Vec3::FORWARD).norm() < 1e-12);
    }
}
