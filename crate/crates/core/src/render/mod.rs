//! Geometric binaural renderer.
//!
//! Each ear hears the mono source through a time-varying propagation delay,
//! a 1/r distance gain and a smooth head-shadow gain. The delay is solved at
//! the emission (retarded) time: for output time `t` the renderer finds the
//! emission time `τ` with `τ + r_e(τ)/c = t` and reads the source at `τ`.
//! Doppler shift and interaural time difference both fall out of that one
//! read; no explicit resampling is done.
//!
//! Head shadow for an ear is `10^(−k (1 − cos θ) / 2 / 20)`, with `θ` the
//! angle between the ear's outward axis and the direction from the ear to
//! the source. A source at 90° azimuth therefore sees an interaural level
//! difference of `k` dB.

use serde::{Deserialize, Serialize};

use crate::dsp::BinauralSignal;
use crate::error::{Error, Result};
use crate::geom::{ear_positions, radial_velocity, Trajectory, Vec3, SPEED_OF_SOUND};

/// Closest a source may come to an ear, meters.
pub const MIN_EAR_DISTANCE: f64 = 1e-3;

const RETARDED_TIME_TOL: f64 = 1e-13;
const RETARDED_TIME_MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    #[default]
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    /// Speed of sound, m/s.
    pub speed_of_sound: f64,
    /// Distance at which the distance gain is 1, meters.
    pub reference_distance: f64,
    /// Head-shadow attenuation in dB for a fully occluded ear.
    pub head_shadow_strength: f64,
    pub interpolation: Interpolation,
    /// Output samples processed per block.
    pub block_size: usize,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            speed_of_sound: SPEED_OF_SOUND,
            reference_distance: 1.0,
            head_shadow_strength: 6.0,
            interpolation: Interpolation::Linear,
            block_size: 4096,
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.speed_of_sound > 0.0 && self.speed_of_sound.is_finite()) {
            return Err(Error::Config(format!(
                "speed_of_sound {} must be positive",
                self.speed_of_sound
            )));
        }
        if !(self.reference_distance > 0.0 && self.reference_distance.is_finite()) {
            return Err(Error::Config(format!(
                "reference_distance {} must be positive",
                self.reference_distance
            )));
        }
        if !self.head_shadow_strength.is_finite() {
            return Err(Error::Config("head_shadow_strength must be finite".into()));
        }
        if self.block_size == 0 {
            return Err(Error::Config("block_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Linear interpolation at a fractional sample index. Positions outside
/// `[0, len − 1]` read as silence.
pub fn fractional_delay_read(signal: &[f64], position: f64) -> f64 {
    if signal.is_empty() || !(position >= 0.0) || position > (signal.len() - 1) as f64 {
        return 0.0;
    }
    let i = position.floor() as usize;
    let frac = position - i as f64;
    if frac == 0.0 || i + 1 >= signal.len() {
        return signal[i];
    }
    signal[i] + (signal[i + 1] - signal[i]) * frac
}

/// Geometry observed while rendering one ear.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarStats {
    pub min_distance: f64,
    pub max_distance: f64,
    pub max_abs_radial_velocity: f64,
    pub out_of_support_reads: usize,
}

impl EarStats {
    fn empty() -> Self {
        Self {
            min_distance: f64::INFINITY,
            max_distance: 0.0,
            max_abs_radial_velocity: 0.0,
            out_of_support_reads: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderStats {
    pub left: EarStats,
    pub right: EarStats,
    pub min_distance: f64,
    pub max_distance: f64,
    pub max_abs_radial_velocity: f64,
    pub out_of_support_reads: usize,
}

/// A finished render.
#[derive(Debug, Clone, PartialEq)]
pub struct Render {
    pub signal: BinauralSignal,
    stats: RenderStats,
}

pub fn render_stats(render: &Render) -> RenderStats {
    render.stats
}

#[derive(Clone, Copy)]
enum Ear {
    Left,
    Right,
}

struct EarRenderer<'a> {
    mono: &'a [f64],
    traj: &'a Trajectory,
    cfg: &'a RenderConfig,
    sample_rate: f64,
    ear: Vec3,
    outward: Vec3,
}

impl EarRenderer<'_> {
    fn distance_at(&self, tau: f64) -> Result<f64> {
        let r = self.traj.position_at(tau)?.distance(self.ear);
        if r < MIN_EAR_DISTANCE {
            return Err(Error::DegenerateGeometry(format!(
                "source within {r:.2e} m of an ear at t = {tau}"
            )));
        }
        Ok(r)
    }

    /// Emission time for output time `t`, or `None` before first arrival.
    fn emission_time(&self, t: f64, guess: f64) -> Result<Option<f64>> {
        let c = self.cfg.speed_of_sound;
        if t < self.distance_at(0.0)? / c {
            return Ok(None);
        }
        let mut tau = guess.clamp(0.0, t);
        for _ in 0..RETARDED_TIME_MAX_ITER {
            let next = (t - self.distance_at(tau)? / c).clamp(0.0, t);
            if (next - tau).abs() <= RETARDED_TIME_TOL {
                return Ok(Some(next));
            }
            tau = next;
        }
        Err(Error::Numeric(format!(
            "emission time did not converge at output time {t}"
        )))
    }

    fn render(&self) -> Result<(Vec<f64>, EarStats)> {
        let n = self.mono.len();
        let sr = self.sample_rate;
        let k = self.cfg.head_shadow_strength;
        let mut out = vec![0.0; n];
        let mut stats = EarStats::empty();
        let mut guess = 0.0;
        for block in (0..n).step_by(self.cfg.block_size) {
            for i in block..(block + self.cfg.block_size).min(n) {
                let t = i as f64 / sr;
                let Some(tau) = self.emission_time(t, guess)? else {
                    continue;
                };
                guess = tau + 1.0 / sr;
                let rel = self.traj.position_at(tau)? - self.ear;
                let r = rel.norm();
                let cos_theta = self.outward.dot(rel) / r;
                let shadow = 10f64.powf(-k * (1.0 - cos_theta) / 2.0 / 20.0);
                let gain = self.cfg.reference_distance / r * shadow;

                let v = crate::geom::finite_difference_velocity(self.traj, tau)?;
                let v_rad = radial_velocity(rel, v)?;
                stats.min_distance = stats.min_distance.min(r);
                stats.max_distance = stats.max_distance.max(r);
                stats.max_abs_radial_velocity = stats.max_abs_radial_velocity.max(v_rad.abs());

                let pos = tau * sr;
                if pos > (n - 1) as f64 {
                    stats.out_of_support_reads += 1;
                }
                out[i] = gain * fractional_delay_read(self.mono, pos);
            }
        }
        if stats.min_distance.is_infinite() {
            stats.min_distance = 0.0;
        }
        Ok((out, stats))
    }
}

/// Renders `mono` (sampled at `sample_rate`) moving along `traj`.
///
/// The output has the same length as the input; the first `r(0)/c` seconds
/// of each channel are silent.
pub fn render_binaural(
    mono: &[f64],
    sample_rate: u32,
    traj: &Trajectory,
    cfg: &RenderConfig,
) -> Result<Render> {
    cfg.validate()?;
    if sample_rate == 0 {
        return Err(Error::input("sample rate must be positive"));
    }
    if mono.is_empty() {
        return Err(Error::input("mono input is empty"));
    }
    let sr = f64::from(sample_rate);
    let duration = (mono.len() - 1) as f64 / sr;
    if traj.start_time() > 0.0 || traj.end_time() < duration {
        return Err(Error::input(format!(
            "trajectory covers [{}, {}] s but the signal needs [0, {duration}] s",
            traj.start_time(),
            traj.end_time()
        )));
    }
    let speed = traj.max_segment_speed();
    if speed >= cfg.speed_of_sound {
        return Err(Error::PhysicalDomain(format!(
            "source speed {speed} m/s reaches the speed of sound {}",
            cfg.speed_of_sound
        )));
    }
    let (left_ear, right_ear) = ear_positions(&traj.listener);
    let axis = traj.listener.to_world(Vec3::LEFT);
    let make = |ear: Ear| {
        let (pos, outward) = match ear {
            Ear::Left => (left_ear, axis),
            Ear::Right => (right_ear, -axis),
        };
        EarRenderer {
            mono,
            traj,
            cfg,
            sample_rate: sr,
            ear: pos,
            outward,
        }
    };
    let (left, right) = std::thread::scope(|s| {
        let l = s.spawn(|| make(Ear::Left).render());
        let r = make(Ear::Right).render();
        (l.join().expect("left-ear render panicked"), r)
    });
    let (left, ls) = left?;
    let (right, rs) = right?;
    let stats = RenderStats {
        left: ls,
        right: rs,
        min_distance: ls.min_distance.min(rs.min_distance),
        max_distance: ls.max_distance.max(rs.max_distance),
        max_abs_radial_velocity: ls.max_abs_radial_velocity.max(rs.max_abs_radial_velocity),
        out_of_support_reads: ls.out_of_support_reads + rs.out_of_support_reads,
    };
    Ok(Render {
        signal: BinauralSignal::new(sample_rate, left, right)?,
        stats,
    })
}
