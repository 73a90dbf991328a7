//! Time–frequency analysis and binaural objective metrics.
//!
//! Channel 1 is the left ear and channel 2 the right ear; interaural
//! quantities are right relative to left.

mod interaural;
mod mel;
mod signal;
mod stft;
pub mod wav;

pub use interaural::{
    interaural_mae, interaural_maps, wrap_phase, InterauralMae, InterauralMaps, ILD_EPSILON,
};
pub use mel::{
    hz_to_mel, mel_filterbank, mel_spectrogram, mel_to_hz, MelFilterBank, MelSpectrogram, DEFAULT_MEL_BINS,
    MEL_FLOOR,
};
pub use signal::{read_mono, rms, BinauralSignal, DEFAULT_SAMPLE_RATE};
pub use stft::{frame_count, stft, ComplexSpectrogram, WindowFn, DEFAULT_HOP_SIZE, DEFAULT_WINDOW_SIZE};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// STFT settings shared by the metric stack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub window_size: usize,
    pub hop_size: usize,
    pub window: WindowFn,
    pub mel_bins: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            window_size: DEFAULT_WINDOW_SIZE,
            hop_size: DEFAULT_HOP_SIZE,
            window: WindowFn::Hann,
            mel_bins: DEFAULT_MEL_BINS,
        }
    }
}

/// Interaural maps of a binaural signal.
pub fn analyze(signal: &BinauralSignal, cfg: &AnalysisConfig) -> Result<InterauralMaps> {
    let sr = f64::from(signal.sample_rate());
    let l = stft(signal.left(), cfg.window_size, cfg.hop_size, cfg.window, sr)?;
    let r = stft(signal.right(), cfg.window_size, cfg.hop_size, cfg.window, sr)?;
    interaural_maps(&l, &r)
}

/// IPD/ILD MAE of `pred` against `gt`. Signals must share rate and length.
pub fn binaural_mae(
    gt: &BinauralSignal,
    pred: &BinauralSignal,
    cfg: &AnalysisConfig,
) -> Result<InterauralMae> {
    if gt.sample_rate() != pred.sample_rate() {
        return Err(Error::input(format!(
            "sample rates differ: {} vs {}",
            gt.sample_rate(),
            pred.sample_rate()
        )));
    }
    if gt.len() != pred.len() {
        return Err(Error::input(format!(
            "signal lengths differ: {} vs {}",
            gt.len(),
            pred.len()
        )));
    }
    interaural_mae(&analyze(gt, cfg)?, &analyze(pred, cfg)?)
}
