use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::vector::{Quat, Vec3};
use crate::error::{Error, Result};

/// Default half distance between the ears, meters.
pub const DEFAULT_EAR_HALF_SPACING: f64 = 0.09;

/// Timestamped source pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseSample {
    pub t: f64,
    pub position: Vec3,
    pub orientation: Quat,
}

impl PoseSample {
    pub fn new(t: f64, position: Vec3, orientation: Quat) -> Result<Self> {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::input(format!("sample time {t} must be finite and >= 0")));
        }
        if !position.is_finite() {
            return Err(Error::input(format!("sample position at t={t} is not finite")));
        }
        Ok(Self {
            t,
            position,
            orientation,
        })
    }

    /// Convenience for a sample with identity orientation.
    pub fn at(t: f64, position: Vec3) -> Result<Self> {
        Self::new(t, position, Quat::IDENTITY)
    }
}

/// Static listener head.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ListenerFrame {
    #[serde(rename = "position")]
    pub head_position: Vec3,
    #[serde(rename = "orientation")]
    pub head_orientation: Quat,
    pub ear_half_spacing: f64,
}

impl ListenerFrame {
    pub fn new(head_position: Vec3, head_orientation: Quat, ear_half_spacing: f64) -> Result<Self> {
        if !(ear_half_spacing.is_finite() && ear_half_spacing >= 0.0) {
            return Err(Error::input(format!(
                "ear_half_spacing {ear_half_spacing} must be finite and non-negative"
            )));
        }
        if !head_position.is_finite() {
            return Err(Error::input("listener position is not finite"));
        }
        Ok(Self {
            head_position,
            head_orientation,
            ear_half_spacing,
        })
    }

    /// Expresses a world-frame direction in head coordinates.
    pub fn to_head(&self, v: Vec3) -> Vec3 {
        self.head_orientation.conjugate().rotate(v)
    }

    /// Expresses a head-frame direction in world coordinates.
    pub fn to_world(&self, v: Vec3) -> Vec3 {
        self.head_orientation.rotate(v)
    }
}

impl Default for ListenerFrame {
    fn default() -> Self {
        Self {
            head_position: Vec3::ZERO,
            head_orientation: Quat::IDENTITY,
            ear_half_spacing: DEFAULT_EAR_HALF_SPACING,
        }
    }
}

/// Ordered source poses heard by one static listener.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    samples: Vec<PoseSample>,
    pub listener: ListenerFrame,
}

impl Trajectory {
    pub fn new(samples: Vec<PoseSample>, listener: ListenerFrame) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::input("trajectory has no samples"));
        }
        for (i, w) in samples.windows(2).enumerate() {
            if w[1].t <= w[0].t {
                return Err(Error::input(format!(
                    "samples[{}].t = {} is not after samples[{i}].t = {}",
                    i + 1,
                    w[1].t,
                    w[0].t
                )));
            }
        }
        Ok(Self { samples, listener })
    }

    /// Source that never moves, sampled at `0` and `duration`.
    pub fn stationary(position: Vec3, duration: f64, listener: ListenerFrame) -> Result<Self> {
        Self::new(
            vec![
                PoseSample::at(0.0, position)?,
                PoseSample::at(duration, position)?,
            ],
            listener,
        )
    }

    /// Constant-velocity source sampled every `dt` seconds over `[0, duration]`.
    pub fn linear(
        start: Vec3,
        velocity: Vec3,
        duration: f64,
        dt: f64,
        listener: ListenerFrame,
    ) -> Result<Self> {
        let n = (duration / dt).ceil().max(1.0) as usize;
        let samples = (0..=n)
            .map(|i| {
                let t = (i as f64 * dt).min(duration);
                PoseSample::at(t, start + velocity * t)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(samples, listener)
    }

    pub fn samples(&self) -> &[PoseSample] {
        &self.samples
    }

    pub fn start_time(&self) -> f64 {
        self.samples[0].t
    }

    pub fn end_time(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    pub(crate) fn check_time(&self, t: f64) -> Result<()> {
        let (min, max) = (self.start_time(), self.end_time());
        if !(t >= min && t <= max) {
            return Err(Error::Range { value: t, min, max });
        }
        Ok(())
    }

    /// Index `i` of the segment `[t_i, t_{i+1}]` holding `t`, and the
    /// fractional position within it. `t` must already be range-checked.
    fn locate(&self, t: f64) -> (usize, f64) {
        let s = &self.samples;
        if s.len() == 1 {
            return (0, 0.0);
        }
        let i = s.partition_point(|p| p.t <= t).saturating_sub(1).min(s.len() - 2);
        let frac = (t - s[i].t) / (s[i + 1].t - s[i].t);
        (i, frac.clamp(0.0, 1.0))
    }

    /// Piecewise-linear source position.
    pub fn position_at(&self, t: f64) -> Result<Vec3> {
        self.check_time(t)?;
        let (i, frac) = self.locate(t);
        let s = &self.samples;
        if s.len() == 1 {
            return Ok(s[0].position);
        }
        Ok(s[i].position.lerp(s[i + 1].position, frac))
    }

    /// Source orientation, normalized-lerp between bracketing samples.
    pub fn orientation_at(&self, t: f64) -> Result<Quat> {
        self.check_time(t)?;
        let (i, frac) = self.locate(t);
        let s = &self.samples;
        if s.len() == 1 {
            return Ok(s[0].orientation);
        }
        Ok(s[i].orientation.nlerp(s[i + 1].orientation, frac))
    }

    /// Fastest per-segment source speed, m/s.
    pub fn max_segment_speed(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| w[0].position.distance(w[1].position) / (w[1].t - w[0].t))
            .fold(0.0, f64::max)
    }

    pub fn from_json_str(text: &str, lax: bool) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        Self::from_json_value(value, lax)
    }

    pub fn from_json_file(path: impl AsRef<Path>, lax: bool) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text, lax)
    }

    pub fn from_json_value(value: Value, lax: bool) -> Result<Self> {
        let raw: RawTrajectory = serde_json::from_value(value)?;
        if !lax {
            if let Some(key) = raw.extra.keys().next() {
                return Err(Error::input(format!("unknown key `{key}` in trajectory")));
            }
            if let Some(key) = raw.listener.extra.keys().next() {
                return Err(Error::input(format!("unknown key `listener.{key}`")));
            }
            for (i, s) in raw.samples.iter().enumerate() {
                if let Some(key) = s.extra.keys().next() {
                    return Err(Error::input(format!("unknown key `samples[{i}].{key}`")));
                }
            }
        }
        let listener = ListenerFrame::new(
            raw.listener.position.into(),
            quat_field(raw.listener.orientation, "listener.orientation")?,
            raw.listener.ear_half_spacing,
        )?;
        let samples = raw
            .samples
            .into_iter()
            .enumerate()
            .map(|(i, s)| {
                let q = quat_field(s.orientation, &format!("samples[{i}].orientation"))?;
                PoseSample::new(s.t, s.position.into(), q)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(samples, listener)
    }

    pub fn to_json_value(&self) -> Value {
        serde_json::json!({
            "listener": {
                "position": self.listener.head_position.to_array(),
                "orientation": self.listener.head_orientation.components(),
                "ear_half_spacing": self.listener.ear_half_spacing,
            },
            "samples": self.samples.iter().map(|s| serde_json::json!({
                "t": s.t,
                "position": s.position.to_array(),
                "orientation": s.orientation.components(),
            })).collect::<Vec<_>>(),
        })
    }
}

fn quat_field(a: [f64; 4], field: &str) -> Result<Quat> {
    Quat::new(a[0], a[1], a[2], a[3]).ok_or_else(|| Error::input(format!("`{field}` is zero or non-finite")))
}

#[derive(Deserialize)]
struct RawTrajectory {
    listener: RawListener,
    samples: Vec<RawSample>,
    #[serde(flatten)]
    extra: BTreeMap<String, Value>,
}

#[derive(Deserialize)]
struct RawListener {
    position: [f64; 3],
    orientation: [f64; 4],
    #[serde(default = "default_spacing")]
    ear_half_spacing: f64,
    #[serde(flatten)]
    extra: BTreeMap<String, Value>,
}

#[derive(Deserialize)]
struct RawSample {
    t: f64,
    position: [f64; 3],
    #[serde(default = "identity_components")]
    orientation: [f64; 4],
    #[serde(flatten)]
    extra: BTreeMap<String, Value>,
}

fn default_spacing() -> f64 {
    DEFAULT_EAR_HALF_SPACING
}

fn identity_components() -> [f64; 4] {
    [1.0, 0.0, 0.0, 0.0]
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = r#"{
        "listener": {"position": [0,0,0], "orientation": [1,0,0,0], "ear_half_spacing": 0.09},
        "samples": [
            {"t": 0.0, "position": [1,0,0], "orientation": [2,0,0,0]},
            {"t": 1.0, "position": [2,0,0], "orientation": [1,0,0,0]}
        ]
    }"#;

    #[test]
    fn parses_and_normalizes() {
        let traj = Trajectory::from_json_str(DOC, false).unwrap();
        assert_eq!(traj.samples().len(), 2);
        let q = traj.samples()[0].orientation;
        assert!((q.norm() - 1.0).abs() < 1e-9);
        let back = Trajectory::from_json_value(traj.to_json_value(), false).unwrap();
        assert_eq!(back, traj);
    }

    #[test]
    fn unknown_keys_rejected_unless_lax() {
        let doc = DOC.replace("\"t\": 1.0,", "\"t\": 1.0, \"speed\": 3,");
        let err = Trajectory::from_json_str(&doc, false).unwrap_err();
        assert!(err.to_string().contains("samples[1].speed"), "{err}");
        assert!(Trajectory::from_json_str(&doc, true).is_ok());
    }

    #[test]
    fn non_increasing_timestamps_rejected() {
        let doc = DOC.replace("\"t\": 1.0", "\"t\": 0.0");
        assert!(matches!(
            Trajectory::from_json_str(&doc, false),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn negative_time_rejected() {
        let doc = DOC.replace("\"t\": 0.0", "\"t\": -1.0");
        assert!(Trajectory::from_json_str(&doc, false).is_err());
    }

    #[test]
    fn missing_field_names_it() {
        let doc = DOC.replace("\"t\": 0.0, ", "");
        let err = Trajectory::from_json_str(&doc, false).unwrap_err();
        assert!(err.to_string().contains("`t`"), "{err}");
    }

    #[test]
    fn interpolates_position() {
        let traj = Trajectory::from_json_str(DOC, false).unwrap();
        let p = traj.position_at(0.25).unwrap();
        assert!((p - Vec3::new(1.25, 0.0, 0.0)).norm() < 1e-15);
        assert!(matches!(traj.position_at(1.5), Err(Error::Range { .. })));
    }
}
