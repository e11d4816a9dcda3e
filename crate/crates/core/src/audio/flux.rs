//! Band-wise spectral-flux onset envelopes and the frame-rate augmentation set.

use std::path::Path;

use crate::audio::Spectrogram;
use crate::error::{Error, Result};

/// Per-frame, per-band onset strength. Frame `t` represents time
/// `t / frame_rate + frame_offset` (the analysis window center).
#[derive(Debug, Clone)]
pub struct OnsetEnvelope {
    values: Vec<f64>,
    n_bands: usize,
    pub frame_rate: f64,
    pub frame_offset: f64,
    pub band_edges: Vec<(f64, f64)>,
}

impl OnsetEnvelope {
    pub fn new(values: Vec<f64>, n_bands: usize, frame_rate: f64, band_edges: Vec<(f64, f64)>) -> Self {
        debug_assert_eq!(band_edges.len(), n_bands);
        debug_assert!(n_bands == 0 || values.len() % n_bands == 0);
        Self {
            values,
            n_bands,
            frame_rate,
            frame_offset: 0.0,
            band_edges,
        }
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

    pub fn n_frames(&self) -> usize {
        if self.n_bands == 0 {
            0
        } else {
            self.values.len() / self.n_bands
        }
    }

    pub fn n_bands(&self) -> usize {
        self.n_bands
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.values[t * self.n_bands..(t + 1) * self.n_bands]
    }

    pub fn value(&self, t: usize, band: usize) -> f64 {
        self.values[t * self.n_bands + band]
    }

    /// Sum across bands, one value per frame.
    pub fn band_sum(&self) -> Vec<f64> {
        (0..self.n_frames())
            .map(|t| self.frame(t).iter().sum())
            .collect()
    }

    /// Rescale each band so its global maximum is 1 (no-op for silent bands).
    pub fn normalize_global(&self) -> OnsetEnvelope {
        let mut out = self.clone();
        for b in 0..self.n_bands {
            let max = (0..self.n_frames())
                .map(|t| self.value(t, b))
                .fold(0f64, f64::max);
            if max > 0.0 {
                for t in 0..self.n_frames() {
                    out.values[t * self.n_bands + b] /= max;
                }
            }
        }
        out
    }

    /// CSV export for debugging: one row per frame, one column per band.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let header: String = std::iter::once("frame".to_string())
            .chain((0..self.n_bands).map(|b| format!("band{b}")))
            .collect::<Vec<_>>()
            .join(",");
        let n_bands = self.n_bands;
        super::write_frame_csv(
            path,
            &header,
            n_bands,
            (0..self.n_frames()).map(|t| self.frame(t).to_vec()),
        )
    }
}

/// Half-wave rectified frame-to-frame increase of (optionally log-compressed)
/// magnitudes, summed per frequency band. Frame 0 is all zeros.
pub fn spectral_flux(
    spec: &Spectrogram,
    band_edges: &[(f64, f64)],
    log_compress: bool,
) -> Result<OnsetEnvelope> {
    let lambda = 1.0;
    let n_bands = band_edges.len();
    let mut band_bins: Vec<Vec<usize>> = Vec::with_capacity(n_bands);
    for &(lo, hi) in band_edges {
        let bins: Vec<usize> = spec
            .bin_freqs
            .iter()
            .enumerate()
            .filter(|(_, &f)| f >= lo && f < hi)
            .map(|(k, _)| k)
            .collect();
        if bins.is_empty() {
            return Err(Error::EmptyBand(format!(
                "band [{lo}, {hi}) Hz contains no spectrogram bins"
            )));
        }
        band_bins.push(bins);
    }

    let n_frames = spec.n_frames();
    let mut values = vec![0f64; n_frames * n_bands];
    let compress = |m: f32| -> f64 {
        let m = m as f64;
        if log_compress {
            (1.0 + lambda * m).ln()
        } else {
            m
        }
    };
    for t in 1..n_frames {
        let prev = spec.frame(t - 1);
        let cur = spec.frame(t);
        for (b, bins) in band_bins.iter().enumerate() {
            let mut acc = 0f64;
            for &k in bins {
                let d = compress(cur[k]) - compress(prev[k]);
                if d > 0.0 {
                    acc += d;
                }
            }
            values[t * n_bands + b] = acc;
        }
    }
    let mut env = OnsetEnvelope::new(values, n_bands, spec.frame_rate, band_edges.to_vec());
    env.frame_offset = spec.frame_offset;
    Ok(env)
}

/// Rescale every value to [0, 1] by the running min/max over a centered
/// window of `2 * half_window` seconds. Constant windows map to 0.
pub fn normalize_local(env: &OnsetEnvelope, half_window: f64) -> Result<OnsetEnvelope> {
    if half_window <= 0.0 {
        return Err(Error::InvalidInput("half_window must be positive".into()));
    }
    let hw = (half_window * env.frame_rate).round() as usize;
    let n = env.n_frames();
    let mut out = env.clone();
    for b in 0..env.n_bands {
        for t in 0..n {
            let lo = t.saturating_sub(hw);
            let hi = (t + hw).min(n.saturating_sub(1));
            let mut min = f64::INFINITY;
            let mut max = f64::NEG_INFINITY;
            for s in lo..=hi {
                let v = env.value(s, b);
                min = min.min(v);
                max = max.max(v);
            }
            out.values[t * env.n_bands + b] = if max > min {
                (env.value(t, b) - min) / (max - min)
            } else {
                0.0
            };
        }
    }
    Ok(out)
}

/// The augmentation set of frame rates: -5%, -2.5%, base, +2.5%, +5%,
/// ascending. Always five values.
pub fn frame_rate_variants(base_fps: f64) -> Vec<f64> {
    vec![
        base_fps * 950.0 / 1000.0,
        base_fps * 975.0 / 1000.0,
        base_fps,
        base_fps * 1025.0 / 1000.0,
        base_fps * 1050.0 / 1000.0,
    ]
}
