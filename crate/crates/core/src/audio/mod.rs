//! Audio input and feature extraction: WAV loading, STFT, log-frequency
//! filterbank features and band-wise spectral-flux onset envelopes.

mod flux;
mod stft;

pub use flux::{frame_rate_variants, normalize_local, spectral_flux, OnsetEnvelope};
pub use stft::{log_filterbank_features, stft, FeatureMatrix, Spectrogram};

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Mono audio signal with its sample rate.
#[derive(Debug, Clone)]
pub struct AudioBuffer {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidInput("sample rate must be positive".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidInput("non-finite audio sample".into()));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Slice out `[start, start + len)` seconds as a new buffer.
    pub fn slice_seconds(&self, start: f64, len: f64) -> AudioBuffer {
        let a = ((start * self.sample_rate as f64).round() as usize).min(self.samples.len());
        let b = (((start + len) * self.sample_rate as f64).round() as usize)
            .min(self.samples.len());
        AudioBuffer {
            samples: self.samples[a..b].to_vec(),
            sample_rate: self.sample_rate,
        }
    }
}

/// Load a mono PCM WAV file (16-bit integer or 32-bit float samples).
/// Multi-channel input is averaged down to mono.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut reader = hound::WavReader::open(path).map_err(|e| Error::Wav {
        path: display.clone(),
        message: e.to_string(),
    })?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::Wav {
            path: display,
            message: "zero channels".into(),
        });
    }
    let interleaved: Vec<f32> = match spec.sample_format {
        hound::SampleFormat::Int => {
            let denom = (1i64 << (spec.bits_per_sample - 1)) as f32;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f32 / denom))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Wav {
                    path: display.clone(),
                    message: e.to_string(),
                })?
        }
        hound::SampleFormat::Float => reader
            .samples::<f32>()
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Wav {
                path: display.clone(),
                message: e.to_string(),
            })?,
    };
    let samples = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(channels)
            .map(|frame| frame.iter().sum::<f32>() / channels as f32)
            .collect()
    };
    AudioBuffer::new(samples, spec.sample_rate)
}

/// Write a mono 16-bit PCM WAV file.
pub fn write_wav(path: impl AsRef<Path>, audio: &AudioBuffer) -> Result<()> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: audio.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| Error::Wav {
        path: display.clone(),
        message: e.to_string(),
    })?;
    for &s in &audio.samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        writer.write_sample(v).map_err(|e| Error::Wav {
            path: display.clone(),
            message: e.to_string(),
        })?;
    }
    writer.finalize().map_err(|e| Error::Wav {
        path: display,
        message: e.to_string(),
    })
}

/// Write a frames-by-columns matrix as CSV with a leading frame index column.
pub(crate) fn write_frame_csv(
    path: impl AsRef<Path>,
    header: &str,
    n_cols: usize,
    rows: impl Iterator<Item = Vec<f64>>,
) -> Result<()> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut out = std::io::BufWriter::new(
        std::fs::File::create(path).map_err(|e| Error::io(&display, e))?,
    );
    writeln!(out, "{header}").map_err(|e| Error::io(&display, e))?;
    for (i, row) in rows.enumerate() {
        debug_assert_eq!(row.len(), n_cols);
        let mut line = String::with_capacity(n_cols * 12);
        line.push_str(&i.to_string());
        for v in row {
            line.push(',');
            line.push_str(&format!("{v:.6}"));
        }
        writeln!(out, "{line}").map_err(|e| Error::io(&display, e))?;
    }
    Ok(())
}
