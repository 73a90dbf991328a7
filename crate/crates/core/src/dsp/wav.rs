//! RIFF/WAVE input and output.
//!
//! Reads 16-bit PCM and 32-bit float files with one or two channels and
//! writes 32-bit float.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{Error, Result};

/// Deinterleaved audio as read from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct WavData {
    pub sample_rate: u32,
    pub channels: Vec<Vec<f64>>,
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<WavData> {
    let path = path.as_ref();
    let mut reader = WavReader::open(path)?;
    let spec = reader.spec();
    let n_ch = spec.channels as usize;
    if !(1..=2).contains(&n_ch) {
        return Err(Error::input(format!(
            "{}: {} channels, expected 1 or 2",
            path.display(),
            n_ch
        )));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| f64::from(v) / 32768.0))
            .collect::<Result<_, _>>()?,
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()?,
        (fmt, bits) => {
            return Err(Error::input(format!(
                "{}: unsupported sample format {fmt:?} {bits}-bit (want 16-bit PCM or 32-bit float)",
                path.display()
            )))
        }
    };
    let mut channels = vec![Vec::with_capacity(interleaved.len() / n_ch); n_ch];
    for frame in interleaved.chunks_exact(n_ch) {
        for (c, &v) in channels.iter_mut().zip(frame) {
            c.push(v);
        }
    }
    Ok(WavData {
        sample_rate: spec.sample_rate,
        channels,
    })
}

/// Writes equal-length channels as 32-bit float.
pub fn write_wav(path: impl AsRef<Path>, sample_rate: u32, channels: &[&[f64]]) -> Result<()> {
    if channels.is_empty() || channels.len() > 2 {
        return Err(Error::input("can only write 1 or 2 channels"));
    }
    let len = channels[0].len();
    if channels.iter().any(|c| c.len() != len) {
        return Err(Error::input("channel lengths differ"));
    }
    let spec = WavSpec {
        channels: channels.len() as u16,
        sample_rate,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let mut writer = WavWriter::create(path, spec)?;
    for i in 0..len {
        for c in channels {
            writer.write_sample(c[i] as f32)?;
        }
    }
    writer.finalize()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        let left: Vec<f64> = (0..100).map(|i| f64::from((i as f32 * 0.37).sin())).collect();
        let right: Vec<f64> = left.iter().map(|v| -v * 0.5).collect();
        write_wav(&path, 48000, &[&left, &right]).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.sample_rate, 48000);
        assert_eq!(back.channels, vec![left, right]);
    }

    #[test]
    fn reads_pcm16() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.wav");
        let spec = WavSpec {
            channels: 1,
            sample_rate: 48000,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(&path, spec).unwrap();
        for v in [0i16, 16384, -32768] {
            w.write_sample(v).unwrap();
        }
        w.finalize().unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.channels, vec![vec![0.0, 0.5, -1.0]]);
    }

    #[test]
    fn rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.wav");
        std::fs::write(&path, b"not a wav file at all").unwrap();
        assert!(read_wav(&path).is_err());
    }
}
