//! Dynamic bar-pointer tracker: a hidden Markov model over (bar position,
//! tempo) states with per-grid-bin GMM observation models trained from
//! annotated snippets, decoding beats and downbeats jointly by Viterbi.
//!
//! One rhythmic pattern is assumed to remain constant throughout a signal,
//! with a two-band spectral-flux observation feature.

mod gmm;

pub use gmm::{Gaussian, GaussianMixture, COVARIANCE_FLOOR};

use serde::{Deserialize, Serialize};

use crate::audio::OnsetEnvelope;
use crate::beats::{BeatEvent, BeatList};
use crate::error::{Error, Result};
use crate::hmm::{viterbi, PhaseStateSpace};

/// One-bar feature grid: `beats_per_bar * bins_per_beat` bins.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BarGrid {
    pub beats_per_bar: u32,
    pub bins_per_beat: u32,
}

impl BarGrid {
    pub fn new(beats_per_bar: u32, bins_per_beat: u32) -> Result<Self> {
        if beats_per_bar == 0 || bins_per_beat == 0 {
            return Err(Error::InvalidInput(
                "bar grid needs positive beats_per_bar and bins_per_beat".into(),
            ));
        }
        Ok(Self {
            beats_per_bar,
            bins_per_beat,
        })
    }

    pub fn bins_per_bar(&self) -> usize {
        (self.beats_per_bar * self.bins_per_beat) as usize
    }
}

/// Beat times of one complete bar plus the bounding next beat:
/// `times.len() == beats_per_bar + 1`.
#[derive(Debug, Clone)]
pub(crate) struct CompleteBar {
    pub(crate) times: Vec<f64>,
}

/// Scan an annotation list for complete bars: position 1, 2, .., B runs
/// bounded by a following beat.
pub(crate) fn complete_bars(ann: &BeatList, beats_per_bar: u32) -> Vec<CompleteBar> {
    let b = beats_per_bar as usize;
    let ev = &ann.events;
    let mut bars = Vec::new();
    let mut i = 0;
    while i + b < ev.len() {
        let is_bar = ev[i].position == Some(1)
            && (1..b).all(|j| ev[i + j].position == Some(j as u32 + 1));
        if is_bar {
            bars.push(CompleteBar {
                times: ev[i..=i + b].iter().map(|e| e.time).collect(),
            });
            i += b;
        } else {
            i += 1;
        }
    }
    bars
}

/// Per-bar grid features: for each complete bar, the mean envelope value per
/// band over the frames of each grid bin (bin boundaries by linear
/// interpolation of the bar's beat times). Bars not covered by the envelope
/// are skipped.
///
/// Returns `bars x bins x bands`.
pub fn quantize_to_grid(
    env: &OnsetEnvelope,
    ann: &BeatList,
    grid: &BarGrid,
) -> Result<Vec<Vec<Vec<f64>>>> {
    let bars = complete_bars(ann, grid.beats_per_bar);
    if bars.is_empty() {
        return Err(Error::NoCompleteBar(format!(
            "{} events, none form a full {}-beat bar with positions",
            ann.len(),
            grid.beats_per_bar
        )));
    }
    let n_frames = env.n_frames();
    if n_frames == 0 {
        return Err(Error::InvalidInput("empty envelope".into()));
    }
    let env_end = env.time_at(n_frames - 1);
    let bands = env.n_bands();
    let bins_per_beat = grid.bins_per_beat as usize;

    let mut out = Vec::new();
    for bar in &bars {
        if *bar.times.last().unwrap() > env_end + 1.0 / env.frame_rate {
            continue;
        }
        let mut bar_bins = vec![vec![0f64; bands]; grid.bins_per_bar()];
        for beat in 0..grid.beats_per_bar as usize {
            let t0 = bar.times[beat];
            let t1 = bar.times[beat + 1];
            for l in 0..bins_per_beat {
                let bin_start = t0 + (t1 - t0) * l as f64 / bins_per_beat as f64;
                let bin_end = t0 + (t1 - t0) * (l + 1) as f64 / bins_per_beat as f64;
                let first = ((bin_start - env.frame_offset) * env.frame_rate).ceil() as i64;
                let last = ((bin_end - env.frame_offset) * env.frame_rate).ceil() as i64 - 1;
                let first = first.clamp(0, n_frames as i64 - 1) as usize;
                let last = last.clamp(0, n_frames as i64 - 1) as usize;
                let bin = &mut bar_bins[beat * bins_per_beat + l];
                if last >= first {
                    let count = (last - first + 1) as f64;
                    for t in first..=last {
                        for (d, v) in bin.iter_mut().enumerate() {
                            *v += env.value(t, d) / count;
                        }
                    }
                } else {
                    // bin narrower than a frame: sample the nearest frame
                    let t = env.frame_at((bin_start + bin_end) / 2.0);
                    for (d, v) in bin.iter_mut().enumerate() {
                        *v = env.value(t, d);
                    }
                }
            }
        }
        out.push(bar_bins);
    }
    if out.is_empty() {
        return Err(Error::NoCompleteBar(
            "no complete bar lies within the envelope span".into(),
        ));
    }
    Ok(out)
}

/// Per-grid-bin mixture observation model over the band feature vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GmmObservationModel {
    pub per_bin: Vec<GaussianMixture>,
    pub n_bands: usize,
}

/// Fit one GMM per grid bin from pooled per-bar samples.
/// `samples_per_bin[bin]` holds the feature vectors observed at that bin.
pub fn fit_gmm(
    samples_per_bin: &[Vec<Vec<f64>>],
    k: usize,
    seed: u64,
) -> Result<GmmObservationModel> {
    let mut per_bin = Vec::with_capacity(samples_per_bin.len());
    let mut n_bands = 0;
    for (bin, samples) in samples_per_bin.iter().enumerate() {
        if samples.is_empty() {
            return Err(Error::EmptyGridBin(format!("grid bin {bin} has no samples")));
        }
        n_bands = samples[0].len();
        let (mixture, _) = GaussianMixture::fit(samples, k, seed.wrapping_add(bin as u64))?;
        per_bin.push(mixture);
    }
    Ok(GmmObservationModel { per_bin, n_bands })
}

/// Trained bar-pointer model: discretized (position, tempo) state space plus
/// the per-bin observation GMMs. A single rhythmic pattern is assumed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BarPointerModel {
    pub grid: BarGrid,
    /// Position bins per bar (M).
    pub n_positions: usize,
    /// Integer position increments per frame, ascending.
    pub tempos: Vec<usize>,
    pub tempo_change_prob: f64,
    pub frame_rate: f64,
    /// Flux bands the observation model was trained on.
    pub band_edges: Vec<(f64, f64)>,
    pub obs: GmmObservationModel,
}

impl BarPointerModel {
    fn validate(&self) -> Result<()> {
        if self.n_positions % self.grid.beats_per_bar as usize != 0 {
            return Err(Error::InvalidInput(format!(
                "{} position bins not divisible by {} beats per bar",
                self.n_positions, self.grid.beats_per_bar
            )));
        }
        if self.obs.per_bin.len() != self.grid.bins_per_bar() {
            return Err(Error::UntrainedModel(format!(
                "model has {} bin GMMs for a {}-bin grid",
                self.obs.per_bin.len(),
                self.grid.bins_per_bar()
            )));
        }
        Ok(())
    }

    /// Grid bin containing each position state.
    fn bin_of_positions(&self) -> Vec<usize> {
        let bins = self.grid.bins_per_bar();
        (0..self.n_positions)
            .map(|m| m * bins / self.n_positions)
            .collect()
    }

    /// Convert beats per minute to a (fractional) position increment per frame.
    pub fn bpm_to_increment(&self, bpm: f64) -> f64 {
        let bar_seconds = self.grid.beats_per_bar as f64 * 60.0 / bpm;
        self.n_positions as f64 / (bar_seconds * self.frame_rate)
    }

    /// Beats per minute corresponding to an integer tempo increment.
    pub fn increment_to_bpm(&self, tau: usize) -> f64 {
        let bar_frames = self.n_positions as f64 / tau as f64;
        self.grid.beats_per_bar as f64 * 60.0 / (bar_frames / self.frame_rate)
    }
}

/// The (position, tempo) state space and transition structure for a model.
pub fn build_state_space(model: &BarPointerModel) -> Result<PhaseStateSpace> {
    model.validate()?;
    PhaseStateSpace::new(
        model.n_positions,
        model.tempos.clone(),
        model.tempo_change_prob,
    )
}

/// Per-state observation log-likelihood of one envelope frame (all tempo
/// states at a position share the GMM of the grid bin containing it).
pub fn observation_loglik(model: &BarPointerModel, frame_value: &[f64]) -> Result<Vec<f64>> {
    model.validate()?;
    if frame_value.len() != model.obs.n_bands {
        return Err(Error::ShapeMismatch(format!(
            "feature has {} bands, model expects {}",
            frame_value.len(),
            model.obs.n_bands
        )));
    }
    let bin_ll: Vec<f64> = model
        .obs
        .per_bin
        .iter()
        .map(|g| g.log_pdf(frame_value))
        .collect();
    let bin_of = model.bin_of_positions();
    let n_tempos = model.tempos.len();
    let mut out = vec![0f64; model.n_positions * n_tempos];
    for ti in 0..n_tempos {
        let row = &mut out[ti * model.n_positions..(ti + 1) * model.n_positions];
        for (m, o) in row.iter_mut().enumerate() {
            *o = bin_ll[bin_of[m]];
        }
    }
    Ok(out)
}

/// Convert a decoded state path into beat events: a beat is emitted whenever
/// the position pointer crosses a beat boundary (every `M / beats_per_bar`
/// bins), with sub-frame linear interpolation of the crossing time. The
/// boundary at position 0 is the downbeat.
pub fn decode_events(
    space: &PhaseStateSpace,
    states: &[usize],
    frame_rate: f64,
    frame_offset: f64,
    beats_per_bar: u32,
) -> Result<BeatList> {
    let m_count = space.n_positions;
    if m_count % beats_per_bar as usize != 0 {
        return Err(Error::InvalidInput(format!(
            "{m_count} positions not divisible by {beats_per_bar} beats per bar"
        )));
    }
    let sub = m_count / beats_per_bar as usize;
    let mut events = Vec::new();
    if states.is_empty() {
        return BeatList::new(events, Some(beats_per_bar));
    }

    let m0 = space.position_of(states[0]);
    let tau0 = space.tempos[space.tempo_idx_of(states[0])];
    if m0 % sub < tau0 {
        events.push(BeatEvent {
            time: frame_offset,
            position: Some((m0 / sub) as u32 + 1),
        });
    }
    let mut m_prev = m0;
    for (t, &s) in states.iter().enumerate().skip(1) {
        let m = space.position_of(s);
        let advance = (m + m_count - m_prev) % m_count;
        if advance > 0 {
            let mut boundary = (m_prev / sub + 1) * sub;
            while boundary <= m_prev + advance {
                let frac = (boundary - m_prev) as f64 / advance as f64;
                let time = (t as f64 - 1.0 + frac) / frame_rate + frame_offset;
                let beat_idx = (boundary % m_count) / sub;
                events.push(BeatEvent {
                    time,
                    position: Some(beat_idx as u32 + 1),
                });
                boundary += sub;
            }
        }
        m_prev = m;
    }
    BeatList::new(events, Some(beats_per_bar))
}

/// Training configuration for [`bayes_train`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BayesTrainConfig {
    pub beats_per_bar: u32,
    pub bins_per_beat: u32,
    pub n_positions: usize,
    pub tempo_change_prob: f64,
    pub gmm_components: usize,
    /// Relative padding applied to the annotated tempo range.
    pub tempo_pad: f64,
    pub seed: u64,
}

impl Default for BayesTrainConfig {
    fn default() -> Self {
        Self {
            beats_per_bar: 4,
            bins_per_beat: 16,
            n_positions: 1216,
            tempo_change_prob: 0.02,
            gmm_components: 2,
            tempo_pad: 0.2,
            seed: 0,
        }
    }
}

/// Train a bar-pointer model: globally normalize each envelope, quantize all
/// complete bars to the grid, pool samples across excerpts, fit the per-bin
/// GMMs, and derive the tempo range from the annotated tempi padded by
/// `tempo_pad`.
pub fn bayes_train(
    excerpts: &[(OnsetEnvelope, BeatList)],
    config: &BayesTrainConfig,
) -> Result<BarPointerModel> {
    if excerpts.is_empty() {
        return Err(Error::InvalidInput("no training excerpts".into()));
    }
    let frame_rate = excerpts[0].0.frame_rate;
    let band_edges = excerpts[0].0.band_edges.clone();
    let grid = BarGrid::new(config.beats_per_bar, config.bins_per_beat)?;
    let bins = grid.bins_per_bar();

    let mut samples_per_bin: Vec<Vec<Vec<f64>>> = vec![Vec::new(); bins];
    let mut bpm_min = f64::INFINITY;
    let mut bpm_max = f64::NEG_INFINITY;
    let mut any_bar = false;
    for (env, ann) in excerpts {
        if (env.frame_rate - frame_rate).abs() > 1e-9 {
            return Err(Error::FrameRateMismatch {
                expected: frame_rate,
                got: env.frame_rate,
            });
        }
        for pair in ann.events.windows(2) {
            let ibi = pair[1].time - pair[0].time;
            if ibi > 0.0 {
                let bpm = 60.0 / ibi;
                bpm_min = bpm_min.min(bpm);
                bpm_max = bpm_max.max(bpm);
            }
        }
        let normalized = env.normalize_global();
        match quantize_to_grid(&normalized, ann, &grid) {
            Ok(bars) => {
                any_bar = true;
                for bar in bars {
                    for (bin, value) in bar.into_iter().enumerate() {
                        samples_per_bin[bin].push(value);
                    }
                }
            }
            Err(Error::NoCompleteBar(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    if !any_bar {
        return Err(Error::NoCompleteBar(
            "no excerpt contains a complete annotated bar".into(),
        ));
    }
    if !bpm_min.is_finite() {
        return Err(Error::InvalidInput(
            "annotations contain no beat intervals to derive a tempo range".into(),
        ));
    }

    let obs = fit_gmm(&samples_per_bin, config.gmm_components, config.seed)?;

    let mut model = BarPointerModel {
        grid,
        n_positions: config.n_positions,
        tempos: Vec::new(),
        tempo_change_prob: config.tempo_change_prob,
        frame_rate,
        band_edges,
        obs,
    };
    let lo = model.bpm_to_increment(bpm_min * (1.0 - config.tempo_pad));
    let hi = model.bpm_to_increment(bpm_max * (1.0 + config.tempo_pad));
    let sub = config.n_positions / config.beats_per_bar as usize;
    let tau_lo = (lo.floor() as usize).max(1);
    let tau_hi = (hi.ceil() as usize).clamp(tau_lo, sub.saturating_sub(1).max(1));
    model.tempos = (tau_lo..=tau_hi).collect();
    model.validate()?;
    Ok(model)
}

/// Track an envelope with a trained model: normalize, score every frame under
/// the per-bin GMMs, run Viterbi over the (position, tempo) space, and decode
/// boundary crossings into beat events.
pub fn bayes_track(model: &BarPointerModel, env: &OnsetEnvelope) -> Result<BeatList> {
    model.validate()?;
    if (env.frame_rate - model.frame_rate).abs() > 1e-6 {
        return Err(Error::FrameRateMismatch {
            expected: model.frame_rate,
            got: env.frame_rate,
        });
    }
    if env.n_bands() != model.obs.n_bands {
        return Err(Error::ShapeMismatch(format!(
            "envelope has {} bands, model expects {}",
            env.n_bands(),
            model.obs.n_bands
        )));
    }
    let n_frames = env.n_frames();
    if n_frames == 0 {
        return Err(Error::InvalidInput("empty envelope".into()));
    }

    let normalized = env.normalize_global();
    let bins = model.grid.bins_per_bar();
    let mut bin_ll = vec![0f64; n_frames * bins];
    for t in 0..n_frames {
        let frame = normalized.frame(t);
        let row = &mut bin_ll[t * bins..(t + 1) * bins];
        for (b, o) in row.iter_mut().enumerate() {
            *o = model.obs.per_bin[b].log_pdf(frame);
        }
    }

    let space = build_state_space(model)?;
    let trans = space.transitions()?;
    let bin_of = model.bin_of_positions();
    let m_count = model.n_positions;
    let n_tempos = model.tempos.len();
    let initial = space.uniform_initial_log();
    let path = viterbi(&trans, &initial, n_frames, |t, out| {
        let row = &bin_ll[t * bins..(t + 1) * bins];
        for ti in 0..n_tempos {
            let chunk = &mut out[ti * m_count..(ti + 1) * m_count];
            for (m, o) in chunk.iter_mut().enumerate() {
                *o = row[bin_of[m]];
            }
        }
    })?;

    decode_events(
        &space,
        &path.states,
        env.frame_rate,
        env.frame_offset,
        model.grid.beats_per_bar,
    )
}

#[cfg(test)]
mod tests;
