use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::stft::ComplexSpectrogram;
use crate::error::{Error, Result};

/// Guard added to magnitudes before the level ratio.
pub const ILD_EPSILON: f64 = 1e-10;

/// Wraps an angle into (−π, π].
pub fn wrap_phase(x: f64) -> f64 {
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    if y <= -PI {
        y += 2.0 * PI;
    }
    y
}

/// Per-cell IPD (radians) and ILD (dB) of right relative to left.
#[derive(Debug, Clone, PartialEq)]
pub struct InterauralMaps {
    pub frames: usize,
    pub bins: usize,
    pub ipd: Vec<f64>,
    pub ild: Vec<f64>,
}

impl InterauralMaps {
    pub fn ipd_at(&self, frame: usize, bin: usize) -> f64 {
        self.ipd[frame * self.bins + bin]
    }

    pub fn ild_at(&self, frame: usize, bin: usize) -> f64 {
        self.ild[frame * self.bins + bin]
    }
}

/// IPD = ∠(X_r · conj X_l), ILD = 20 log10((|X_r| + ε) / (|X_l| + ε)).
pub fn interaural_maps(left: &ComplexSpectrogram, right: &ComplexSpectrogram) -> Result<InterauralMaps> {
    if !left.same_grid(right) {
        return Err(Error::input(format!(
            "channel grids differ: {}x{} vs {}x{}",
            left.frames(),
            left.bins(),
            right.frames(),
            right.bins()
        )));
    }
    let (ipd, ild) = left
        .data()
        .iter()
        .zip(right.data())
        .map(|(l, r)| {
            let cross = r * l.conj();
            let phase = wrap_phase(cross.im.atan2(cross.re));
            // difference of logs, so swapping channels negates the level exactly
            let level = 20.0 * ((r.norm() + ILD_EPSILON).log10() - (l.norm() + ILD_EPSILON).log10());
            (phase, level)
        })
        .unzip();
    Ok(InterauralMaps {
        frames: left.frames(),
        bins: left.bins(),
        ipd,
        ild,
    })
}

/// Mean absolute IPD/ILD errors over the time–frequency grid, scaled ×100.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterauralMae {
    pub ipd_mae: f64,
    pub ild_mae: f64,
}

/// IPD differences are wrapped before taking the absolute value.
pub fn interaural_mae(gt: &InterauralMaps, pred: &InterauralMaps) -> Result<InterauralMae> {
    if gt.frames != pred.frames || gt.bins != pred.bins {
        return Err(Error::input(format!(
            "metric grids differ: {}x{} vs {}x{}",
            gt.frames, gt.bins, pred.frames, pred.bins
        )));
    }
    let cells = gt.ipd.len();
    if cells == 0 {
        return Err(Error::input("empty time-frequency grid"));
    }
    let ipd: f64 = gt
        .ipd
        .iter()
        .zip(&pred.ipd)
        .map(|(a, b)| wrap_phase(b - a).abs())
        .sum();
    let ild: f64 = gt.ild.iter().zip(&pred.ild).map(|(a, b)| (b - a).abs()).sum();
    Ok(InterauralMae {
        ipd_mae: 100.0 * ipd / cells as f64,
        ild_mae: 100.0 * ild / cells as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::stft::{stft, WindowFn};

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut s = seed;
        (0..n)
            .map(|_| {
                s = s
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect()
    }

    fn spec(x: &[f64]) -> ComplexSpectrogram {
        stft(x, 256, 64, WindowFn::Hann, 48000.0).unwrap()
    }

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_phase(PI), PI);
        assert_eq!(wrap_phase(-PI), PI);
        assert!((wrap_phase(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_phase(PI + 0.1) - (-PI + 0.1)).abs() < 1e-12);
        assert_eq!(wrap_phase(0.5), 0.5);
    }

    #[test]
    fn identical_channels() {
        let x = noise(2048, 1);
        let s = spec(&x);
        let m = interaural_maps(&s, &s).unwrap();
        assert!(m.ipd.iter().all(|&v| v == 0.0));
        assert!(m.ild.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_gain() {
        let x = noise(2048, 2);
        let y: Vec<f64> = x.iter().map(|v| 10.0 * v).collect();
        let m = interaural_maps(&spec(&x), &spec(&y)).unwrap();
        for (p, l) in m.ipd.iter().zip(&m.ild) {
            assert!(p.abs() < 1e-9);
            assert!((l - 20.0).abs() < 1e-6);
        }
    }

    #[test]
    fn delayed_bin_tone_phase() {
        let (n, k, d) = (256usize, 12usize, 5usize);
        let tone = |shift: usize| -> Vec<f64> {
            (0..n)
                .map(|i| (2.0 * PI * (k as f64) * (i as f64 - shift as f64) / n as f64).cos())
                .collect()
        };
        let l = stft(&tone(0), n, n, WindowFn::Rectangular, 48000.0).unwrap();
        let r = stft(&tone(d), n, n, WindowFn::Rectangular, 48000.0).unwrap();
        let m = interaural_maps(&l, &r).unwrap();
        let expected = wrap_phase(-2.0 * PI * (k * d) as f64 / n as f64);
        assert!((m.ipd_at(0, k) - expected).abs() < 1e-9);
    }

    #[test]
    fn mae_offsets() {
        let x = noise(2048, 3);
        let y = noise(2048, 4);
        let gt = interaural_maps(&spec(&x), &spec(&y)).unwrap();
        assert_eq!(
            interaural_mae(&gt, &gt).unwrap(),
            InterauralMae {
                ipd_mae: 0.0,
                ild_mae: 0.0
            }
        );
        let mut pred = gt.clone();
        pred.ild.iter_mut().for_each(|v| *v += 0.05);
        let mae = interaural_mae(&gt, &pred).unwrap();
        assert!((mae.ild_mae - 5.0).abs() < 1e-9);
        assert_eq!(mae.ipd_mae, 0.0);

        // constant phase offset; ipd values near ±π still compare by wrapped distance
        let mut pred = gt.clone();
        pred.ipd.iter_mut().for_each(|v| *v = wrap_phase(*v + 0.01));
        let mae = interaural_mae(&gt, &pred).unwrap();
        assert!((mae.ipd_mae - 1.0).abs() < 1e-9);
    }

    #[test]
    fn grid_mismatch() {
        let a = interaural_maps(&spec(&noise(2048, 1)), &spec(&noise(2048, 2))).unwrap();
        let b = interaural_maps(&spec(&noise(1024, 1)), &spec(&noise(1024, 2))).unwrap();
        assert!(interaural_mae(&a, &b).is_err());
        assert!(interaural_maps(&spec(&noise(2048, 1)), &spec(&noise(1024, 1))).is_err());
    }
}
