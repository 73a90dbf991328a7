//! Measurement helpers shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Hann-windowed DTFT magnitude of `x` at `freq` Hz.
pub fn dtft_mag(x: &[f64], sr: f64, freq: f64) -> f64 {
    let n = x.len() as f64;
    let w = 2.0 * PI * freq / sr;
    let (mut re, mut im) = (0.0, 0.0);
    for (i, &v) in x.iter().enumerate() {
        let win = 0.5 - 0.5 * (2.0 * PI * i as f64 / n).cos();
        let (s, c) = (w * i as f64).sin_cos();
        re += win * v * c;
        im -= win * v * s;
    }
    (re * re + im * im).sqrt()
}

/// Frequency of the largest windowed-DTFT peak in `[lo, hi]`, located on a
/// 1 Hz grid and refined to 0.01 Hz.
pub fn dominant_frequency(x: &[f64], sr: f64, lo: f64, hi: f64) -> f64 {
    let scan = |a: f64, b: f64, step: f64| {
        let mut best = (a, f64::MIN);
        let mut f = a;
        while f <= b {
            let m = dtft_mag(x, sr, f);
            if m > best.1 {
                best = (f, m);
            }
            f += step;
        }
        best.0
    };
    let coarse = scan(lo, hi, 1.0);
    scan(coarse - 1.0, coarse + 1.0, 0.01)
}

/// Lag `k` maximizing `Σ_n a[n + k] · b[n]` over `|k| ≤ max_lag`, refined by a
/// parabola through the peak and its neighbours.
pub fn xcorr_lag(a: &[f64], b: &[f64], max_lag: i64) -> f64 {
    let corr = |k: i64| -> f64 {
        let mut s = 0.0;
        for n in 0..b.len() as i64 {
            let i = n + k;
            if i >= 0 && (i as usize) < a.len() {
                s += a[i as usize] * b[n as usize];
            }
        }
        s
    };
    let values: Vec<f64> = (-max_lag..=max_lag).map(corr).collect();
    let (idx, _) = values
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.total_cmp(y.1))
        .unwrap();
    let k = idx as i64 - max_lag;
    if idx == 0 || idx + 1 == values.len() {
        return k as f64;
    }
    let (ym, y0, yp) = (values[idx - 1], values[idx], values[idx + 1]);
    let denom = ym - 2.0 * y0 + yp;
    let shift = if denom.abs() > 0.0 {
        0.5 * (ym - yp) / denom
    } else {
        0.0
    };
    k as f64 + shift
}

/// Deterministic white noise in [-1, 1].
pub fn noise(n: usize, seed: u64) -> Vec<f64> {
    use dramakit::numerics::Rng;
    let mut rng = Rng::seeded(seed);
    (0..n).map(|_| rng.uniform_range(-1.0, 1.0)).collect()
}

pub fn tone(freq: f64, sr: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| (2.0 * PI * freq * i as f64 / sr).sin()).collect()
}
