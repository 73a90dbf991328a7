//! Head-relative pose geometry.
//!
//! # Frame convention
//!
//! All head-frame quantities use a right-handed frame with `+x` pointing
//! forward out of the face, `+y` toward the left ear and `+z` up. A
//! listener's `head_orientation` is the attitude of that frame in the
//! world: rotating a head-frame vector by it yields world coordinates.
//! With the identity orientation the two frames coincide.
//!
//! Radial velocity is positive when the source recedes from the reference
//! point, so the observed Doppler frequency is `f_s * c / (c + v_rad)`.

mod trajectory;
mod vector;

pub use trajectory::{ListenerFrame, PoseSample, Trajectory, DEFAULT_EAR_HALF_SPACING};
pub use vector::{Quat, Vec3};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default speed of sound, m/s.
pub const SPEED_OF_SOUND: f64 = 343.0;

/// Geometric pose feature of a source at one instant, as seen by the
/// listener's two ears.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoseFeature {
    /// Source position relative to the left ear, head frame.
    pub pos_l: Vec3,
    /// Source position relative to the right ear, head frame.
    pub pos_r: Vec3,
    pub ori: Quat,
    pub v_rad_l: f64,
    pub v_rad_r: f64,
}

impl GeoPoseFeature {
    /// Flattened `[pos_l, pos_r, ori(w,x,y,z), v_rad_l, v_rad_r]`, 12 values.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(12);
        out.extend(self.pos_l.to_array());
        out.extend(self.pos_r.to_array());
        out.extend(self.ori.components());
        out.push(self.v_rad_l);
        out.push(self.v_rad_r);
        out
    }
}

/// World-frame (left, right) ear positions.
pub fn ear_positions(listener: &ListenerFrame) -> (Vec3, Vec3) {
    let axis = listener.to_world(Vec3::LEFT) * listener.ear_half_spacing;
    (listener.head_position + axis, listener.head_position - axis)
}

/// Source velocity at time `t`, assuming straight-line motion between samples.
///
/// At a sample time strictly inside the trajectory this is the central
/// difference over the two neighbouring samples; at the first and last sample
/// it is one-sided. Between samples it is the slope of the containing segment.
pub fn finite_difference_velocity(traj: &Trajectory, t: f64) -> Result<Vec3> {
    let s = traj.samples();
    if s.len() < 2 {
        return Err(Error::input("velocity needs at least 2 trajectory samples"));
    }
    traj.check_time(t)?;
    let slope = |a: &PoseSample, b: &PoseSample| (b.position - a.position) * (1.0 / (b.t - a.t));
    let last = s.len() - 1;
    if t == s[0].t {
        return Ok(slope(&s[0], &s[1]));
    }
    if t == s[last].t {
        return Ok(slope(&s[last - 1], &s[last]));
    }
    match s.binary_search_by(|p| p.t.total_cmp(&t)) {
        Ok(i) => Ok(slope(&s[i - 1], &s[i + 1])),
        Err(i) => Ok(slope(&s[i - 1], &s[i])),
    }
}

/// Scalar projection of `v` onto the direction of `pos_rel` (receding positive).
pub fn radial_velocity(pos_rel: Vec3, v: Vec3) -> Result<f64> {
    let r = pos_rel.norm();
    if r == 0.0 || !r.is_finite() {
        return Err(Error::DegenerateGeometry(
            "radial velocity needs a non-zero relative position".into(),
        ));
    }
    Ok(pos_rel.dot(v) / r)
}

/// Frequency heard by a static observer from a source with radial velocity
/// `v_rad` (receding positive).
pub fn doppler_shift(f_s: f64, v_rad: f64, c: f64) -> Result<f64> {
    if !(f_s > 0.0) {
        return Err(Error::input(format!("source frequency {f_s} must be positive")));
    }
    if !(c > 0.0) {
        return Err(Error::input(format!("speed of sound {c} must be positive")));
    }
    if !(v_rad.abs() < c) {
        return Err(Error::PhysicalDomain(format!(
            "|v_rad| = {} must be below the speed of sound {c}",
            v_rad.abs()
        )));
    }
    Ok(f_s * c / (c + v_rad))
}

/// Ratio `f_o / f_s` for a given radial velocity.
pub fn doppler_factor(v_rad: f64, c: f64) -> Result<f64> {
    doppler_shift(1.0, v_rad, c)
}

/// Per-ear pose feature at time `t`.
pub fn geo_pose_feature(traj: &Trajectory, t: f64) -> Result<GeoPoseFeature> {
    let source = traj.position_at(t)?;
    let v = finite_difference_velocity(traj, t)?;
    let (left, right) = ear_positions(&traj.listener);
    let rel_l = source - left;
    let rel_r = source - right;
    Ok(GeoPoseFeature {
        pos_l: traj.listener.to_head(rel_l),
        pos_r: traj.listener.to_head(rel_r),
        ori: traj.orientation_at(t)?,
        v_rad_l: radial_velocity(rel_l, v)?,
        v_rad_r: radial_velocity(rel_r, v)?,
    })
}

/// Spherical coordinates of a head-frame vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleDistance {
    /// Radians in (−π, π], positive toward the left ear.
    pub azimuth: f64,
    /// Radians in [−π/2, π/2], positive upward.
    pub elevation: f64,
    pub distance: f64,
}

impl AngleDistance {
    /// Unit direction vector in the head frame.
    pub fn direction(&self) -> Vec3 {
        let (se, ce) = self.elevation.sin_cos();
        let (sa, ca) = self.azimuth.sin_cos();
        Vec3::new(ce * ca, ce * sa, se)
    }
}

pub fn angle_distance(pos_rel: Vec3) -> Result<AngleDistance> {
    let distance = pos_rel.norm();
    if distance == 0.0 || !distance.is_finite() {
        return Err(Error::DegenerateGeometry(
            "angle/distance of a zero vector".into(),
        ));
    }
    let mut azimuth = pos_rel.y.atan2(pos_rel.x);
    if azimuth <= -std::f64::consts::PI {
        azimuth = std::f64::consts::PI;
    }
    let elevation = (pos_rel.z / distance).clamp(-1.0, 1.0).asin();
    Ok(AngleDistance {
        azimuth,
        elevation,
        distance,
    })
}
