//! Tatum-quantized onset-strength distributions per frequency band,
//! quantifying how deterministic a tradition's rhythm pattern is.

use std::io::Write;
use std::path::Path;

use crate::audio::OnsetEnvelope;
use crate::bayes::complete_bars;
use crate::beats::BeatList;
use crate::error::{Error, Result};

/// Tatums per beat (a tatum spans one quarter of the beat interval).
pub const TATUMS_PER_BEAT: usize = 4;

/// Pooled per-(band, tatum) strength samples over all bars of a dataset.
/// Tatum indices are 1-based in all reported output.
#[derive(Debug, Clone)]
pub struct TatumProfile {
    pub beats_per_bar: u32,
    pub n_bands: usize,
    /// `samples[band][tatum]`, tatum 0-based internally.
    samples: Vec<Vec<Vec<f64>>>,
    /// Excerpts dropped for lacking a complete bar.
    pub skipped_excerpts: usize,
}

impl TatumProfile {
    pub fn tatums_per_bar(&self) -> usize {
        self.beats_per_bar as usize * TATUMS_PER_BEAT
    }

    /// Samples of one (band, 1-based tatum) cell.
    pub fn samples(&self, band: usize, tatum: usize) -> &[f64] {
        &self.samples[band][tatum - 1]
    }
}

/// Quantize locally normalized envelopes to the tatum grid: per bar and
/// tatum, the maximum strength within the tatum span (boundaries by linear
/// interpolation between annotated beats), pooled across bars and excerpts.
/// Excerpts without a complete bar are skipped and counted.
pub fn compute_profile(
    excerpts: &[(OnsetEnvelope, BeatList)],
    beats_per_bar: u32,
) -> Result<TatumProfile> {
    if excerpts.is_empty() {
        return Err(Error::InvalidInput("no excerpts to profile".into()));
    }
    let n_bands = excerpts[0].0.n_bands();
    let tatums = beats_per_bar as usize * TATUMS_PER_BEAT;
    let mut samples = vec![vec![Vec::new(); tatums]; n_bands];
    let mut skipped = 0usize;
    for (env, ann) in excerpts {
        if env.n_bands() != n_bands {
            return Err(Error::ShapeMismatch(
                "inconsistent band count across excerpts".into(),
            ));
        }
        let bars = complete_bars(ann, beats_per_bar);
        if bars.is_empty() {
            skipped += 1;
            continue;
        }
        let n_frames = env.n_frames();
        if n_frames == 0 {
            skipped += 1;
            continue;
        }
        let env_end = env.time_at(n_frames - 1);
        for bar in &bars {
            if *bar.times.last().unwrap() > env_end + 1.0 / env.frame_rate {
                continue;
            }
            for beat in 0..beats_per_bar as usize {
                let t0 = bar.times[beat];
                let t1 = bar.times[beat + 1];
                for sub in 0..TATUMS_PER_BEAT {
                    let span_start = t0 + (t1 - t0) * sub as f64 / TATUMS_PER_BEAT as f64;
                    let span_end = t0 + (t1 - t0) * (sub + 1) as f64 / TATUMS_PER_BEAT as f64;
                    let first = ((span_start - env.frame_offset) * env.frame_rate).ceil() as i64;
                    let last = ((span_end - env.frame_offset) * env.frame_rate).ceil() as i64 - 1;
                    let first = first.clamp(0, n_frames as i64 - 1) as usize;
                    let last = last.clamp(0, n_frames as i64 - 1) as usize;
                    let tatum = beat * TATUMS_PER_BEAT + sub;
                    for band in 0..n_bands {
                        let value = if last >= first {
                            (first..=last)
                                .map(|t| env.value(t, band))
                                .fold(f64::NEG_INFINITY, f64::max)
                        } else {
                            env.value(env.frame_at((span_start + span_end) / 2.0), band)
                        };
                        samples[band][tatum].push(value);
                    }
                }
            }
        }
    }
    if samples.iter().all(|band| band.iter().all(|t| t.is_empty())) {
        return Err(Error::NoCompleteBar(
            "no excerpt contributed a complete bar".into(),
        ));
    }
    Ok(TatumProfile {
        beats_per_bar,
        n_bands,
        samples,
        skipped_excerpts: skipped,
    })
}

/// Order statistics of one (band, tatum) cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TatumStat {
    pub band: usize,
    /// 1-based tatum index.
    pub tatum: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    /// Population variance.
    pub variance: f64,
    pub n: usize,
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let idx = (sorted.len() - 1) as f64 * p;
    let lo = idx.floor() as usize;
    let hi = idx.ceil() as usize;
    let frac = idx - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Exact order statistics per (band, tatum); errors on an empty tatum.
pub fn profile_stats(profile: &TatumProfile) -> Result<Vec<TatumStat>> {
    let mut out = Vec::new();
    for band in 0..profile.n_bands {
        for tatum in 1..=profile.tatums_per_bar() {
            let raw = profile.samples(band, tatum);
            if raw.is_empty() {
                return Err(Error::EmptyGridBin(format!(
                    "band {band} tatum {tatum} has no samples"
                )));
            }
            let mut sorted = raw.to_vec();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
            let variance =
                sorted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / sorted.len() as f64;
            out.push(TatumStat {
                band,
                tatum,
                median: quantile(&sorted, 0.5),
                q1: quantile(&sorted, 0.25),
                q3: quantile(&sorted, 0.75),
                variance,
                n: sorted.len(),
            });
        }
    }
    Ok(out)
}

/// Tatums whose strength distribution is nearly deterministic
/// (variance below the threshold); these anchor the rhythm pattern.
pub fn anchor_tatums(stats: &[TatumStat], variance_threshold: f64) -> Vec<(usize, usize)> {
    stats
        .iter()
        .filter(|s| s.variance < variance_threshold)
        .map(|s| (s.band, s.tatum))
        .collect()
}

/// `profile.csv`: band, tatum, median, q1, q3, variance, n.
pub fn write_stats_csv(stats: &[TatumStat], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut out =
        std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(&display, e))?);
    writeln!(out, "band,tatum,median,q1,q3,variance,n").map_err(|e| Error::io(&display, e))?;
    for s in stats {
        writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{:.6},{}",
            s.band, s.tatum, s.median, s.q1, s.q3, s.variance, s.n
        )
        .map_err(|e| Error::io(&display, e))?;
    }
    Ok(())
}

/// `profile_raw.csv`: band, tatum, value — every pooled sample.
pub fn write_raw_csv(profile: &TatumProfile, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut out =
        std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(&display, e))?);
    writeln!(out, "band,tatum,value").map_err(|e| Error::io(&display, e))?;
    for band in 0..profile.n_bands {
        for tatum in 1..=profile.tatums_per_bar() {
            for v in profile.samples(band, tatum) {
                writeln!(out, "{band},{tatum},{v:.6}").map_err(|e| Error::io(&display, e))?;
            }
        }
    }
    Ok(())
}
