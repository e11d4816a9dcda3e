//! Activation post-processing: DBN-style beat and downbeat Viterbi decoders
//! (inferred separately) plus a dynamic-programming baseline tracker.
//!
//! The decoders are reimplemented on the crate's Viterbi core rather than
//! wrapping an external implementation. States are (beat phase, tempo) pairs
//! where tempo is an exact integer beat period in frames; the phase advances
//! one position per frame and the tempo may move to an adjacent period at
//! each phase wrap, with the same stay/adjacent probabilities as the
//! bar-pointer tempo transition.

mod ellis;

pub use ellis::ellis_track;

use serde::{Deserialize, Serialize};

use crate::beats::{BeatEvent, BeatList};
use crate::error::{Error, Result};
use crate::hmm::{viterbi, Transitions};
use crate::tcn::ActivationPair;

/// Allowed decoding tempo range in beats per minute.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TempoRange {
    pub min_bpm: f64,
    pub max_bpm: f64,
}

impl TempoRange {
    pub fn new(min_bpm: f64, max_bpm: f64) -> Result<Self> {
        if !(0.0 < min_bpm && min_bpm < max_bpm) {
            return Err(Error::InvalidInput(format!(
                "need 0 < min_bpm < max_bpm, got [{min_bpm}, {max_bpm}]"
            )));
        }
        Ok(Self { min_bpm, max_bpm })
    }

    /// Default range for candombe-like material.
    pub const CANDOMBE: TempoRange = TempoRange {
        min_bpm: 100.0,
        max_bpm: 170.0,
    };
    /// Default range for samba-like material.
    pub const SAMBA: TempoRange = TempoRange {
        min_bpm: 60.0,
        max_bpm: 140.0,
    };
    /// Genre-agnostic default.
    pub const GENERIC: TempoRange = TempoRange {
        min_bpm: 55.0,
        max_bpm: 215.0,
    };
}

/// Internals of the phase/tempo decoders.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DbnConfig {
    /// The beat window is the first `1/interior_share` of each beat period;
    /// interior states share the complementary observation mass.
    pub interior_share: f64,
    pub tempo_change_prob: f64,
}

impl Default for DbnConfig {
    fn default() -> Self {
        Self {
            interior_share: 16.0,
            tempo_change_prob: 0.02,
        }
    }
}

const ACTIVATION_CLIP: f64 = 1e-5;
const OBS_FLOOR: f64 = 1e-9;

fn clip(a: f64) -> f64 {
    a.clamp(ACTIVATION_CLIP, 1.0 - ACTIVATION_CLIP)
}

/// Beat periods in frames covered by a tempo range.
fn periods(frame_rate: f64, range: &TempoRange) -> Result<Vec<usize>> {
    let p_min = ((60.0 * frame_rate / range.max_bpm).ceil() as usize).max(2);
    let p_max = (60.0 * frame_rate / range.min_bpm).floor() as usize;
    if p_max < p_min {
        return Err(Error::InvalidInput(format!(
            "tempo range [{}, {}] BPM holds no whole frame period at {frame_rate} fps",
            range.min_bpm, range.max_bpm
        )));
    }
    Ok((p_min..=p_max).collect())
}

/// State layout for (period, beat slot, phase) spaces. The beat decoder uses
/// one slot; the downbeat decoder uses `beats_per_bar` slots.
struct PeriodSpace {
    periods: Vec<usize>,
    slots: usize,
    /// state index where each period block starts
    offsets: Vec<usize>,
    n_states: usize,
}

impl PeriodSpace {
    fn new(periods: Vec<usize>, slots: usize) -> Self {
        let mut offsets = Vec::with_capacity(periods.len());
        let mut acc = 0;
        for &p in &periods {
            offsets.push(acc);
            acc += p * slots;
        }
        Self {
            periods,
            slots,
            offsets,
            n_states: acc,
        }
    }

    fn index(&self, pi: usize, slot: usize, phase: usize) -> usize {
        self.offsets[pi] + slot * self.periods[pi] + phase
    }

    /// `(period index, slot, phase)` of a state.
    fn locate(&self, state: usize) -> (usize, usize, usize) {
        let pi = match self.offsets.binary_search(&state) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        let within = state - self.offsets[pi];
        let p = self.periods[pi];
        (pi, within / p, within % p)
    }

    /// Transition structure: phase advances once per frame; at each wrap the
    /// slot advances cyclically and the period stays or moves to an adjacent
    /// value (clamped at the edges, renormalized).
    fn transitions(&self, tempo_change_prob: f64) -> Result<Transitions> {
        let mut edges = Vec::new();
        let n_periods = self.periods.len();
        for pi in 0..n_periods {
            let p = self.periods[pi];
            for slot in 0..self.slots {
                for phase in 0..p {
                    let from = self.index(pi, slot, phase);
                    if phase + 1 < p {
                        edges.push((from, self.index(pi, slot, phase + 1), 1.0));
                    } else {
                        let next_slot = (slot + 1) % self.slots;
                        let mut moves = vec![(pi, 1.0 - tempo_change_prob)];
                        if pi > 0 {
                            moves.push((pi - 1, tempo_change_prob / 2.0));
                        }
                        if pi + 1 < n_periods {
                            moves.push((pi + 1, tempo_change_prob / 2.0));
                        }
                        let total: f64 = moves.iter().map(|&(_, q)| q).sum();
                        for (pj, q) in moves {
                            edges.push((from, self.index(pj, next_slot, 0), q / total));
                        }
                    }
                }
            }
        }
        Transitions::from_edges(self.n_states, &edges)
    }

    fn uniform_initial_log(&self) -> Vec<f64> {
        vec![-(self.n_states as f64).ln(); self.n_states]
    }
}

/// Decode beat times from a per-frame beat activation.
///
/// Viterbi over (beat phase, tempo) states: phases in the first
/// `1/interior_share` of the period observe the activation, interior phases
/// observe `(1 - activation) / interior_share`. A beat is emitted at every
/// phase wrap. Output positions are unset.
pub fn dbn_beat_decode(
    beat_act: &[f64],
    frame_rate: f64,
    frame_offset: f64,
    range: &TempoRange,
    config: &DbnConfig,
) -> Result<BeatList> {
    if beat_act.is_empty() {
        return Err(Error::InvalidInput("empty activation sequence".into()));
    }
    let space = PeriodSpace::new(periods(frame_rate, range)?, 1);
    let trans = space.transitions(config.tempo_change_prob)?;
    let initial = space.uniform_initial_log();
    let windows: Vec<usize> = space
        .periods
        .iter()
        .map(|&p| ((p as f64 / config.interior_share).ceil() as usize).max(1))
        .collect();
    let path = viterbi(&trans, &initial, beat_act.len(), |t, out| {
        let a = clip(beat_act[t]);
        let on = a.ln();
        let off = ((1.0 - a) / config.interior_share).max(OBS_FLOOR).ln();
        for (pi, &p) in space.periods.iter().enumerate() {
            let block = &mut out[space.offsets[pi]..space.offsets[pi] + p];
            let w = windows[pi];
            for (phase, o) in block.iter_mut().enumerate() {
                *o = if phase < w { on } else { off };
            }
        }
    })?;
    let events = emit_wraps(&space, &path.states, frame_rate, frame_offset);
    BeatList::from_times(&events.iter().map(|e| e.time).collect::<Vec<_>>())
}

/// Decode beats with metrical positions from the joint beat/downbeat
/// activations. One Viterbi per `beats_per_bar` option over (bar slot, beat
/// phase, tempo) states; the best-scoring option wins.
pub fn dbn_downbeat_decode(
    acts: &ActivationPair,
    beats_per_bar_options: &[u32],
    range: &TempoRange,
    config: &DbnConfig,
) -> Result<BeatList> {
    if beats_per_bar_options.is_empty() {
        return Err(Error::InvalidInput("no beats_per_bar options".into()));
    }
    if acts.beat.is_empty() {
        return Err(Error::InvalidInput("empty activation sequence".into()));
    }
    if acts.beat.len() != acts.downbeat.len() {
        return Err(Error::ShapeMismatch(format!(
            "beat and downbeat activations differ: {} vs {}",
            acts.beat.len(),
            acts.downbeat.len()
        )));
    }
    let mut best: Option<(f64, BeatList)> = None;
    for &bpb in beats_per_bar_options {
        if bpb == 0 {
            return Err(Error::InvalidInput("beats_per_bar of 0".into()));
        }
        let (log_prob, decoded) = downbeat_decode_one(acts, bpb, range, config)?;
        if best.as_ref().map_or(true, |(b, _)| log_prob > *b) {
            best = Some((log_prob, decoded));
        }
    }
    Ok(best.unwrap().1)
}

fn downbeat_decode_one(
    acts: &ActivationPair,
    beats_per_bar: u32,
    range: &TempoRange,
    config: &DbnConfig,
) -> Result<(f64, BeatList)> {
    let space = PeriodSpace::new(periods(acts.frame_rate, range)?, beats_per_bar as usize);
    let trans = space.transitions(config.tempo_change_prob)?;
    let initial = space.uniform_initial_log();
    let windows: Vec<usize> = space
        .periods
        .iter()
        .map(|&p| ((p as f64 / config.interior_share).ceil() as usize).max(1))
        .collect();
    let n_frames = acts.beat.len();
    let path = viterbi(&trans, &initial, n_frames, |t, out| {
        let bt = clip(acts.beat[t]);
        let db = clip(acts.downbeat[t]);
        let on_downbeat = (bt * db).max(OBS_FLOOR).ln();
        let on_beat = (bt * (1.0 - db)).max(OBS_FLOOR).ln();
        let off = ((1.0 - bt) / config.interior_share).max(OBS_FLOOR).ln();
        for (pi, &p) in space.periods.iter().enumerate() {
            let w = windows[pi];
            for slot in 0..space.slots {
                let start = space.offsets[pi] + slot * p;
                let block = &mut out[start..start + p];
                let on = if slot == 0 { on_downbeat } else { on_beat };
                for (phase, o) in block.iter_mut().enumerate() {
                    *o = if phase < w { on } else { off };
                }
            }
        }
    })?;
    let events = emit_wraps(&space, &path.states, acts.frame_rate, acts.frame_offset);
    let list = BeatList::new(events, Some(beats_per_bar))?;
    Ok((path.log_prob, list))
}

/// Beats are the frames whose phase is 0; the slot identifies the metrical
/// position.
fn emit_wraps(
    space: &PeriodSpace,
    states: &[usize],
    frame_rate: f64,
    frame_offset: f64,
) -> Vec<BeatEvent> {
    let mut events = Vec::new();
    for (t, &s) in states.iter().enumerate() {
        let (_, slot, phase) = space.locate(s);
        if phase == 0 {
            events.push(BeatEvent {
                time: t as f64 / frame_rate + frame_offset,
                position: Some(slot as u32 + 1),
            });
        }
    }
    events
}
