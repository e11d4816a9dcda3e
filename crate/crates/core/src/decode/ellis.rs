//! Dynamic-programming beat tracker: global tempo by autocorrelation, then a
//! beat sequence maximizing onset strength plus a log-squared interval
//! penalty.

use crate::audio::OnsetEnvelope;
use crate::beats::BeatList;
use crate::decode::TempoRange;
use crate::error::{Error, Result};

/// Transition tightness for the interval penalty.
const TIGHTNESS: f64 = 680.0;

/// Track beats with a single global tempo.
///
/// The tempo is the autocorrelation peak of the standardized band-summed
/// envelope within the allowed lag range, ties broken to the slowest tempo.
/// Dynamic programming then maximizes the sum of onset strengths plus
/// `TIGHTNESS * -(ln(interval / period))^2` transition scores; the backtrace
/// from the best last-period score gives the beats. Positions are unset.
pub fn ellis_track(env: &OnsetEnvelope, range: &TempoRange) -> Result<BeatList> {
    let fps = env.frame_rate;
    let n = env.n_frames();
    if (n as f64) < 2.0 * fps {
        return Err(Error::InputTooShort(format!(
            "need at least 2 s of envelope, got {:.2} s",
            n as f64 / fps
        )));
    }
    let raw = env.band_sum();
    let onset = standardize(&raw);

    let min_lag = ((60.0 * fps / range.max_bpm).round() as usize).max(1);
    let max_lag = (60.0 * fps / range.min_bpm).round() as usize;
    if max_lag >= n {
        return Err(Error::InputTooShort(format!(
            "envelope of {n} frames cannot hold one period of the slowest tempo ({max_lag} frames)"
        )));
    }
    let mut best_lag = min_lag;
    let mut best_corr = f64::NEG_INFINITY;
    for lag in min_lag..=max_lag {
        let corr: f64 = onset[..n - lag]
            .iter()
            .zip(&onset[lag..])
            .map(|(a, b)| a * b)
            .sum();
        if corr >= best_corr {
            best_corr = corr;
            best_lag = lag; // later (slower) lag wins ties
        }
    }
    let period = best_lag as f64;

    // score[t] = onset[t] + best over predecessors in [t - 2P, t - P/2]
    let lo_gap = (period / 2.0).round() as usize;
    let hi_gap = (period * 2.0).round() as usize;
    let mut score = onset.clone();
    let mut pred = vec![usize::MAX; n];
    for t in 0..n {
        let from = t.saturating_sub(hi_gap);
        let to = t.saturating_sub(lo_gap);
        if to == t || from > to {
            continue;
        }
        let mut best = f64::NEG_INFINITY;
        let mut best_p = usize::MAX;
        for p in from..=to {
            let gap = (t - p) as f64;
            let penalty = -(gap / period).ln().powi(2);
            let cand = score[p] + TIGHTNESS * penalty;
            if cand > best {
                best = cand;
                best_p = p;
            }
        }
        if best_p != usize::MAX && best >= 0.0 {
            score[t] += best;
            pred[t] = best_p;
        }
    }

    // start the backtrace at the best score within the final period
    let tail_start = n.saturating_sub(best_lag);
    let mut cur = (tail_start..n)
        .max_by(|&a, &b| score[a].partial_cmp(&score[b]).unwrap())
        .unwrap();
    let mut frames = vec![cur];
    while pred[cur] != usize::MAX {
        cur = pred[cur];
        frames.push(cur);
    }
    frames.reverse();
    BeatList::from_times(&frames.iter().map(|&t| env.time_at(t)).collect::<Vec<_>>())
}

fn standardize(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if var > 0.0 {
        let std = var.sqrt();
        x.iter().map(|v| (v - mean) / std).collect()
    } else {
        vec![0.0; x.len()]
    }
}
