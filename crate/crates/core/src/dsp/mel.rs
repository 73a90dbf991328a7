use serde::{Deserialize, Serialize};

use super::stft::ComplexSpectrogram;
use crate::error::{Error, Result};

pub const DEFAULT_MEL_BINS: usize = 80;

/// Floor applied to mel energies before the logarithm.
pub const MEL_FLOOR: f64 = 1e-10;

/// HTK mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters, `bins × mel_bins` row-major, apex weight 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MelFilterBank {
    bins: usize,
    mel_bins: usize,
    weights: Vec<f64>,
    /// `mel_bins + 2` edge frequencies in Hz; filter `m` spans
    /// `edges[m]..edges[m + 2]` with its apex at `edges[m + 1]`.
    edges: Vec<f64>,
}

impl MelFilterBank {
    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn mel_bins(&self) -> usize {
        self.mel_bins
    }

    pub fn weight(&self, bin: usize, mel: usize) -> f64 {
        self.weights[bin * self.mel_bins + mel]
    }

    pub fn center_hz(&self, mel: usize) -> f64 {
        self.edges[mel + 1]
    }

    /// Lower and upper edge of filter `mel`, Hz.
    pub fn support_hz(&self, mel: usize) -> (f64, f64) {
        (self.edges[mel], self.edges[mel + 2])
    }
}

/// Builds `mel_bins` triangular filters evenly spaced on the mel scale
/// from 0 Hz to Nyquist, for an `window_size`-point FFT.
pub fn mel_filterbank(sample_rate: f64, window_size: usize, mel_bins: usize) -> Result<MelFilterBank> {
    if mel_bins == 0 {
        return Err(Error::Config("mel filter bank needs at least one filter".into()));
    }
    if window_size < 2 || !(sample_rate > 0.0) {
        return Err(Error::Config(format!(
            "invalid analysis parameters: sample_rate {sample_rate}, window {window_size}"
        )));
    }
    let bins = window_size / 2 + 1;
    let top = hz_to_mel(sample_rate / 2.0);
    let edges: Vec<f64> = (0..mel_bins + 2)
        .map(|i| mel_to_hz(top * i as f64 / (mel_bins + 1) as f64))
        .collect();
    let mut weights = vec![0.0; bins * mel_bins];
    for m in 0..mel_bins {
        let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        let mut touched = false;
        for b in 0..bins {
            let f = b as f64 * sample_rate / window_size as f64;
            let w = ((f - lo) / (mid - lo)).min((hi - f) / (hi - mid)).max(0.0);
            if w > 0.0 {
                weights[b * mel_bins + m] = w;
                touched = true;
            }
        }
        if !touched {
            return Err(Error::Config(format!(
                "mel filter {m} ({lo:.1}-{hi:.1} Hz) covers no FFT bin; use fewer mel bins or a longer window"
            )));
        }
    }
    Ok(MelFilterBank {
        bins,
        mel_bins,
        weights,
        edges,
    })
}

/// Log mel energies, `frames × mel_bins` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    pub frames: usize,
    pub mel_bins: usize,
    pub data: Vec<f64>,
}

impl MelSpectrogram {
    pub fn get(&self, frame: usize, mel: usize) -> f64 {
        self.data[frame * self.mel_bins + mel]
    }
}

/// `log(max(|X|² · melW, floor))` per frame.
pub fn mel_spectrogram(spec: &ComplexSpectrogram, bank: &MelFilterBank) -> Result<MelSpectrogram> {
    if spec.bins() != bank.bins() {
        return Err(Error::input(format!(
            "spectrogram has {} bins but the filter bank expects {}",
            spec.bins(),
            bank.bins()
        )));
    }
    let m = bank.mel_bins();
    let mut data = Vec::with_capacity(spec.frames() * m);
    let mut acc = vec![0.0; m];
    for f in 0..spec.frames() {
        acc.iter_mut().for_each(|a| *a = 0.0);
        for (b, x) in spec.frame(f).iter().enumerate() {
            let p = x.norm_sqr();
            let row = &bank.weights[b * m..(b + 1) * m];
            for (a, w) in acc.iter_mut().zip(row) {
                *a += p * w;
            }
        }
        data.extend(acc.iter().map(|&e| e.max(MEL_FLOOR).ln()));
    }
    Ok(MelSpectrogram {
        frames: spec.frames(),
        mel_bins: m,
        data,
    })
}
