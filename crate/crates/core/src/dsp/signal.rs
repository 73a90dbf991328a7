use std::path::Path;

use super::wav::{read_wav, write_wav};
use crate::error::{Error, Result};

pub const DEFAULT_SAMPLE_RATE: u32 = 48_000;

/// Two equal-length channels at a common sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct BinauralSignal {
    sample_rate: u32,
    left: Vec<f64>,
    right: Vec<f64>,
}

impl BinauralSignal {
    pub fn new(sample_rate: u32, left: Vec<f64>, right: Vec<f64>) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::input("sample rate must be positive"));
        }
        if left.len() != right.len() {
            return Err(Error::input(format!(
                "channel lengths differ: {} vs {}",
                left.len(),
                right.len()
            )));
        }
        Ok(Self {
            sample_rate,
            left,
            right,
        })
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn left(&self) -> &[f64] {
        &self.left
    }

    pub fn right(&self) -> &[f64] {
        &self.right
    }

    pub fn len(&self) -> usize {
        self.left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty()
    }

    /// Same signal with the channels exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            sample_rate: self.sample_rate,
            left: self.right.clone(),
            right: self.left.clone(),
        }
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let wav = read_wav(path)?;
        let mut ch = wav.channels.into_iter();
        match (ch.next(), ch.next()) {
            (Some(l), Some(r)) => Self::new(wav.sample_rate, l, r),
            _ => Err(Error::input(format!(
                "{}: expected a 2-channel file",
                path.display()
            ))),
        }
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_wav(path, self.sample_rate, &[&self.left, &self.right])
    }
}

/// Reads a mono file, or the first channel of a stereo one.
pub fn read_mono(path: impl AsRef<Path>) -> Result<(u32, Vec<f64>)> {
    let wav = read_wav(path)?;
    let first = wav.channels.into_iter().next().unwrap_or_default();
    Ok((wav.sample_rate, first))
}

/// Root-mean-square level.
pub fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}
