//! Short-time Fourier transform and log-frequency filterbank features.

use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

/// Magnitude spectrogram: `n_frames` rows of `n_bins` non-negative values.
///
/// Frames are left-aligned on the sample grid; `frame_offset` is the time of
/// frame 0's window center, so frame `t` represents time
/// `t / frame_rate + frame_offset`.
#[derive(Debug, Clone)]
pub struct Spectrogram {
    mags: Vec<f32>,
    n_bins: usize,
    pub frame_rate: f64,
    pub frame_offset: f64,
    pub bin_freqs: Vec<f64>,
}

impl Spectrogram {
    pub fn n_frames(&self) -> usize {
        if self.n_bins == 0 {
            0
        } else {
            self.mags.len() / self.n_bins
        }
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn frame(&self, t: usize) -> &[f32] {
        &self.mags[t * self.n_bins..(t + 1) * self.n_bins]
    }

    /// CSV export for debugging: one row per frame, one column per bin.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let header: String = std::iter::once("frame".to_string())
            .chain((0..self.n_bins).map(|b| format!("bin{b}")))
            .collect::<Vec<_>>()
            .join(",");
        let n_bins = self.n_bins;
        super::write_frame_csv(
            path,
            &header,
            n_bins,
            (0..self.n_frames()).map(|t| self.frame(t).iter().map(|&v| v as f64).collect()),
        )
    }
}

fn hann_window(n: usize) -> Vec<f32> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / n as f64).cos())
        .map(|v| v as f32)
        .collect()
}

/// Compute a Hann-windowed magnitude STFT.
///
/// Frame `i` covers samples `[i*hop, i*hop + window)`; the frame count is
/// `(len - window) / hop + 1` and the frame rate is `sample_rate / hop`.
pub fn stft(audio: &AudioBuffer, window_size: usize, hop_size: usize) -> Result<Spectrogram> {
    if hop_size == 0 || window_size < hop_size {
        return Err(Error::InvalidInput(format!(
            "require window_size >= hop_size >= 1, got window {window_size} hop {hop_size}"
        )));
    }
    if audio.samples.len() < window_size {
        return Err(Error::InputTooShort(format!(
            "audio has {} samples, need at least one window of {window_size}",
            audio.samples.len()
        )));
    }
    let n_frames = (audio.samples.len() - window_size) / hop_size + 1;
    let n_bins = window_size / 2 + 1;
    let window = hann_window(window_size);

    let mut planner = FftPlanner::<f32>::new();
    let fft: Arc<dyn Fft<f32>> = planner.plan_fft_forward(window_size);
    let mut scratch = vec![Complex::default(); fft.get_inplace_scratch_len()];
    let mut buf = vec![Complex::default(); window_size];

    let mut mags = vec![0f32; n_frames * n_bins];
    for t in 0..n_frames {
        let start = t * hop_size;
        for (j, b) in buf.iter_mut().enumerate() {
            *b = Complex::new(audio.samples[start + j] * window[j], 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        let row = &mut mags[t * n_bins..(t + 1) * n_bins];
        for (k, m) in row.iter_mut().enumerate() {
            *m = buf[k].norm();
        }
    }

    let sr = audio.sample_rate as f64;
    Ok(Spectrogram {
        mags,
        n_bins,
        frame_rate: sr / hop_size as f64,
        frame_offset: window_size as f64 / (2.0 * sr),
        bin_freqs: (0..n_bins).map(|k| k as f64 * sr / window_size as f64).collect(),
    })
}

/// Frames-by-bands feature matrix (`f64`), the neural model's input.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    pub data: Vec<f64>,
    pub n_bands: usize,
    pub frame_rate: f64,
    pub frame_offset: f64,
}

impl FeatureMatrix {
    pub fn n_frames(&self) -> usize {
        if self.n_bands == 0 {
            0
        } else {
            self.data.len() / self.n_bands
        }
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.n_bands..(t + 1) * self.n_bands]
    }

    /// Time of frame `t` in seconds.
    pub fn time_at(&self, t: usize) -> f64 {
        t as f64 / self.frame_rate + self.frame_offset
    }

    /// Nearest frame to a time in seconds (clamped to the valid range).
    pub fn frame_at(&self, time: f64) -> usize {
        let f = ((time - self.frame_offset) * self.frame_rate).round();
        (f.max(0.0) as usize).min(self.n_frames().saturating_sub(1))
    }
}

/// Map a magnitude spectrogram through a triangular log-frequency filterbank
/// (12 bands per octave between `fmin` and `fmax`, filters with identical
/// center bins merged) and log-compress: `ln(1 + band energy)`.
///
/// At the default front end (2048-sample window, 44.1 kHz) this yields 81
/// bands spanning 30 Hz to 17 kHz.
pub fn log_filterbank_features(spec: &Spectrogram, fmin: f64, fmax: f64) -> Result<FeatureMatrix> {
    let centers = filterbank_center_bins(&spec.bin_freqs, fmin, fmax);
    if centers.len() < 3 {
        return Err(Error::InvalidInput(
            "filterbank needs at least 3 distinct center bins; widen the frequency range".into(),
        ));
    }
    // Triangle i rises from centers[i-1] to centers[i] and falls to centers[i+1].
    let n_bands = centers.len() - 2;
    let n_frames = spec.n_frames();
    let mut data = vec![0f64; n_frames * n_bands];
    for t in 0..n_frames {
        let frame = spec.frame(t);
        let out = &mut data[t * n_bands..(t + 1) * n_bands];
        for (i, o) in out.iter_mut().enumerate() {
            let (lo, mid, hi) = (centers[i], centers[i + 1], centers[i + 2]);
            let mut acc = 0f64;
            for bin in lo..mid {
                let w = (bin - lo) as f64 / (mid - lo) as f64;
                acc += w * frame[bin] as f64;
            }
            for bin in mid..=hi.min(frame.len() - 1) {
                let w = if hi == mid {
                    1.0
                } else {
                    (hi - bin) as f64 / (hi - mid) as f64
                };
                acc += w * frame[bin] as f64;
            }
            *o = (1.0 + acc).ln();
        }
    }
    Ok(FeatureMatrix {
        data,
        n_bands,
        frame_rate: spec.frame_rate,
        frame_offset: spec.frame_offset,
    })
}

/// Semitone-spaced center frequencies snapped to FFT bins, deduplicated.
fn filterbank_center_bins(bin_freqs: &[f64], fmin: f64, fmax: f64) -> Vec<usize> {
    let bin_width = if bin_freqs.len() > 1 {
        bin_freqs[1] - bin_freqs[0]
    } else {
        return Vec::new();
    };
    let mut centers = Vec::new();
    let mut f = fmin;
    let semitone = 2f64.powf(1.0 / 12.0);
    while f <= fmax {
        let bin = (f / bin_width).round() as usize;
        if bin < bin_freqs.len() && centers.last() != Some(&bin) {
            centers.push(bin);
        }
        f *= semitone;
    }
    centers
}
