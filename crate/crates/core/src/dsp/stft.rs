use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_WINDOW_SIZE: usize = 1024;
pub const DEFAULT_HOP_SIZE: usize = 256;

/// Analysis window.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowFn {
    /// Periodic Hann, `0.5 - 0.5 cos(2πn/N)`.
    #[default]
    Hann,
    Rectangular,
}

impl WindowFn {
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            WindowFn::Rectangular => vec![1.0; n],
            WindowFn::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }
}

/// One-sided STFT, `frames × bins` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    frames: usize,
    bins: usize,
    data: Vec<Complex64>,
    pub window_size: usize,
    pub hop: usize,
    pub sample_rate: f64,
}

impl ComplexSpectrogram {
    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    /// Mutable coefficients; the grid itself is fixed.
    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn get(&self, frame: usize, bin: usize) -> Complex64 {
        self.data[frame * self.bins + bin]
    }

    pub fn frame(&self, frame: usize) -> &[Complex64] {
        &self.data[frame * self.bins..(frame + 1) * self.bins]
    }

    /// Center frequency of `bin` in Hz.
    pub fn bin_frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.sample_rate / self.window_size as f64
    }

    pub(crate) fn same_grid(&self, other: &Self) -> bool {
        self.frames == other.frames && self.bins == other.bins
    }
}

/// Frame count for non-padded analysis.
pub fn frame_count(len: usize, window_size: usize, hop: usize) -> usize {
    if len < window_size {
        0
    } else {
        1 + (len - window_size) / hop
    }
}

/// Short-time Fourier transform with frames starting at sample 0 and no padding.
pub fn stft(
    signal: &[f64],
    window_size: usize,
    hop: usize,
    window: WindowFn,
    sample_rate: f64,
) -> Result<ComplexSpectrogram> {
    if !window_size.is_power_of_two() || window_size < 2 {
        return Err(Error::Config(format!(
            "window size {window_size} must be a power of two >= 2"
        )));
    }
    if hop == 0 || hop > window_size {
        return Err(Error::Config(format!("hop {hop} must be in 1..={window_size}")));
    }
    if signal.len() < window_size {
        return Err(Error::input(format!(
            "signal of {} samples is shorter than one {window_size}-sample window",
            signal.len()
        )));
    }
    let frames = frame_count(signal.len(), window_size, hop);
    let bins = window_size / 2 + 1;
    let coeffs = window.coefficients(window_size);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(window_size);
    let mut buf = vec![Complex64::default(); window_size];
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    let mut data = Vec::with_capacity(frames * bins);
    for f in 0..frames {
        let chunk = &signal[f * hop..f * hop + window_size];
        for ((b, &x), &w) in buf.iter_mut().zip(chunk).zip(&coeffs) {
            *b = Complex64::new(x * w, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        data.extend_from_slice(&buf[..bins]);
    }
    Ok(ComplexSpectrogram {
        frames,
        bins,
        data,
        window_size,
        hop,
        sample_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct O(N²) one-sided DFT of a single frame.
    fn dft(frame: &[f64]) -> Vec<Complex64> {
        let n = frame.len();
        (0..=n / 2)
            .map(|k| {
                frame
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| Complex64::from_polar(x, -2.0 * PI * (k * i) as f64 / n as f64))
                    .sum()
            })
            .collect()
    }

    #[test]
    fn zero_signal_gives_zero_spectrum() {
        let s = stft(&[0.0; 2048], 256, 64, WindowFn::Hann, 48000.0).unwrap();
        assert_eq!(s.frames(), 1 + (2048 - 256) / 64);
        assert_eq!(s.bins(), 129);
        assert!(s.data().iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn bin_tone_concentrates_in_its_bin() {
        let (n, k) = (64, 5);
        let x: Vec<f64> = (0..n)
            .map(|i| (2.0 * PI * (k * i) as f64 / n as f64).cos())
            .collect();
        let s = stft(&x, n, n, WindowFn::Rectangular, 48000.0).unwrap();
        assert_eq!(s.frames(), 1);
        let oracle = dft(&x);
        let peak = s.get(0, k).norm();
        assert!((peak - oracle[k].norm()).abs() < 1e-9);
        for (b, c) in s.frame(0).iter().enumerate() {
            assert!((c - oracle[b]).norm() < 1e-9);
            if b != k {
                assert!(c.norm() < 1e-9 * peak, "bin {b}: {}", c.norm());
            }
        }
    }

    #[test]
    fn parseval_per_frame() {
        let n = 128;
        let x: Vec<f64> = (0..512).map(|i| ((i * 7919) % 113) as f64 / 56.0 - 1.0).collect();
        let s = stft(&x, n, 96, WindowFn::Hann, 48000.0).unwrap();
        let w = WindowFn::Hann.coefficients(n);
        for f in 0..s.frames() {
            let time: f64 = (0..n).map(|i| (w[i] * x[f * 96 + i]).powi(2)).sum();
            let row = s.frame(f);
            let inner: f64 = row[1..n / 2].iter().map(|c| c.norm_sqr()).sum();
            let freq = (row[0].norm_sqr() + 2.0 * inner + row[n / 2].norm_sqr()) / n as f64;
            assert!((time - freq).abs() <= 1e-9 * time, "frame {f}");
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(matches!(
            stft(&[0.0; 100], 128, 64, WindowFn::Hann, 1.0),
            Err(Error::Input(_))
        ));
        assert!(stft(&[0.0; 200], 100, 50, WindowFn::Hann, 1.0).is_err());
        assert!(stft(&[0.0; 200], 128, 0, WindowFn::Hann, 1.0).is_err());
        assert!(stft(&[0.0; 200], 128, 129, WindowFn::Hann, 1.0).is_err());
    }

    #[test]
    fn periodic_hann() {
        let w = WindowFn::Hann.coefficients(4);
        assert_eq!(w[0], 0.0);
        assert!((w[2] - 1.0).abs() < 1e-15);
    }
}
