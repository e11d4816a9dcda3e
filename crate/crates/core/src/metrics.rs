//! Beat and downbeat evaluation: F-measure with a fixed matching window,
//! continuity scores at the correct (CMLt) and allowed (AMLt) metrical
//! levels, and percentile-bootstrap aggregation.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::beats::BeatList;
use crate::error::{Error, Result};

/// Matching / tolerance parameters.
#[derive(Debug, Clone, Copy)]
pub struct MetricParams {
    /// F-measure matching window in seconds.
    pub window: f64,
    /// Continuity phase tolerance as a fraction of the local inter-annotation
    /// interval.
    pub phase_tol: f64,
    /// Continuity period tolerance as a fraction of the local interval.
    pub period_tol: f64,
    /// Drop events earlier than this many seconds before evaluating
    /// (0 = evaluate full tracks).
    pub skip_seconds: f64,
}

impl Default for MetricParams {
    fn default() -> Self {
        Self {
            window: 0.07,
            phase_tol: 0.175,
            period_tol: 0.175,
            skip_seconds: 0.0,
        }
    }
}

/// Scores for one estimate/annotation pair.
#[derive(Debug, Clone, Copy, Default)]
pub struct MetricReport {
    pub f_measure: f64,
    pub cmlt: f64,
    pub amlt: f64,
    pub hits: usize,
    pub false_pos: usize,
    pub false_neg: usize,
}

impl MetricReport {
    /// Full report: F-measure plus continuity. Continuity requires at least
    /// two annotations; with fewer, CMLt/AMLt are reported as 0.
    pub fn evaluate(est: &BeatList, ann: &BeatList, params: &MetricParams) -> MetricReport {
        let mut report = f_measure(est, ann, params);
        if let Ok((cmlt, amlt)) = continuity(est, ann, params) {
            report.cmlt = cmlt;
            report.amlt = amlt;
        }
        report
    }
}

fn skipped_times(list: &BeatList, skip: f64) -> Vec<f64> {
    list.events
        .iter()
        .map(|e| e.time)
        .filter(|&t| t >= skip)
        .collect()
}

/// Greedy one-to-one matching within `±params.window`; F = 2PR/(P+R).
/// Both lists empty scores 1, exactly one empty scores 0.
pub fn f_measure(est: &BeatList, ann: &BeatList, params: &MetricParams) -> MetricReport {
    let est = skipped_times(est, params.skip_seconds);
    let ann = skipped_times(ann, params.skip_seconds);
    let mut report = MetricReport::default();
    if est.is_empty() && ann.is_empty() {
        report.f_measure = 1.0;
        return report;
    }

    let mut matched = vec![false; ann.len()];
    let mut hits = 0usize;
    for &e in &est {
        // nearest unmatched annotation within the window
        let mut best: Option<(usize, f64)> = None;
        for (j, &a) in ann.iter().enumerate() {
            if matched[j] {
                continue;
            }
            let d = (e - a).abs();
            if d <= params.window && best.map_or(true, |(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        if let Some((j, _)) = best {
            matched[j] = true;
            hits += 1;
        }
    }
    report.hits = hits;
    report.false_pos = est.len() - hits;
    report.false_neg = ann.len() - hits;
    let p = if est.is_empty() {
        0.0
    } else {
        hits as f64 / est.len() as f64
    };
    let r = if ann.is_empty() {
        0.0
    } else {
        hits as f64 / ann.len() as f64
    };
    report.f_measure = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    report
}

/// Continuity scores `(cmlt, amlt)`.
///
/// An estimated beat is correct when it lies within `phase_tol` of an
/// annotation (relative to the local inter-annotation interval), its own
/// inter-beat interval matches that local interval within `period_tol`, and
/// the preceding estimate also lies within phase tolerance of the preceding
/// annotation region. CMLt is the ratio of correct to annotated beats at the
/// annotated level; AMLt takes the best score over the allowed variations
/// (identity, double, half, offbeat, triple, third).
pub fn continuity(est: &BeatList, ann: &BeatList, params: &MetricParams) -> Result<(f64, f64)> {
    let est = skipped_times(est, params.skip_seconds);
    let ann = skipped_times(ann, params.skip_seconds);
    if ann.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "continuity needs at least 2 annotations, got {}",
            ann.len()
        )));
    }
    let cmlt = continuity_one_level(&est, &ann, params);
    let mut amlt = cmlt;
    for variation in variations(&ann) {
        if variation.len() >= 2 {
            amlt = amlt.max(continuity_one_level(&est, &variation, params));
        }
    }
    Ok((cmlt, amlt))
}

fn local_interval(ann: &[f64], j: usize) -> f64 {
    if j == 0 {
        ann[1] - ann[0]
    } else {
        ann[j] - ann[j - 1]
    }
}

fn nearest_index(ann: &[f64], t: f64) -> usize {
    match ann.binary_search_by(|a| a.partial_cmp(&t).unwrap()) {
        Ok(j) => j,
        Err(j) => {
            if j == 0 {
                0
            } else if j >= ann.len() {
                ann.len() - 1
            } else if (ann[j] - t).abs() < (t - ann[j - 1]).abs() {
                j
            } else {
                j - 1
            }
        }
    }
}

fn continuity_one_level(est: &[f64], ann: &[f64], params: &MetricParams) -> f64 {
    if est.is_empty() {
        return 0.0;
    }
    let phase_ok = |i: usize| -> bool {
        let j = nearest_index(ann, est[i]);
        (est[i] - ann[j]).abs() < params.phase_tol * local_interval(ann, j)
    };
    let mut correct = 0usize;
    for i in 0..est.len() {
        if !phase_ok(i) {
            continue;
        }
        if i == 0 {
            correct += 1;
            continue;
        }
        let j = nearest_index(ann, est[i]);
        let interval = local_interval(ann, j);
        let period_match = ((est[i] - est[i - 1]) - interval).abs() < params.period_tol * interval;
        if period_match && phase_ok(i - 1) {
            correct += 1;
        }
    }
    (correct as f64 / ann.len() as f64).min(1.0)
}

/// The allowed-metrical-level variations of an annotation list.
fn variations(ann: &[f64]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(5);
    // double: interpolate midpoints
    let mut double = Vec::with_capacity(ann.len() * 2);
    for w in ann.windows(2) {
        double.push(w[0]);
        double.push((w[0] + w[1]) / 2.0);
    }
    double.push(*ann.last().unwrap());
    out.push(double);
    // half: every second beat
    out.push(ann.iter().copied().step_by(2).collect());
    // offbeat: midpoints only
    out.push(ann.windows(2).map(|w| (w[0] + w[1]) / 2.0).collect());
    // triple: two interpolated points per interval
    let mut triple = Vec::with_capacity(ann.len() * 3);
    for w in ann.windows(2) {
        triple.push(w[0]);
        triple.push(w[0] + (w[1] - w[0]) / 3.0);
        triple.push(w[0] + 2.0 * (w[1] - w[0]) / 3.0);
    }
    triple.push(*ann.last().unwrap());
    out.push(triple);
    // third: every third beat
    out.push(ann.iter().copied().step_by(3).collect());
    out
}

/// Bootstrap mean and percentile confidence interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapSummary {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
}

/// Percentile bootstrap of the mean over pooled scores; deterministic per
/// seed.
pub fn bootstrap_summary(
    scores: &[f64],
    n_resamples: usize,
    ci: f64,
    seed: u64,
) -> Result<BootstrapSummary> {
    if scores.is_empty() {
        return Err(Error::InvalidInput("bootstrap over an empty group".into()));
    }
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means: Vec<f64> = (0..n_resamples)
        .map(|_| {
            let sum: f64 = (0..scores.len())
                .map(|_| scores[rng.gen_range(0..scores.len())])
                .sum();
            sum / scores.len() as f64
        })
        .collect();
    means.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let alpha = (1.0 - ci) / 2.0;
    let lo_idx = ((n_resamples as f64 - 1.0) * alpha).round() as usize;
    let hi_idx = ((n_resamples as f64 - 1.0) * (1.0 - alpha)).round() as usize;
    Ok(BootstrapSummary {
        mean,
        ci_low: means[lo_idx.min(means.len() - 1)],
        ci_high: means[hi_idx.min(means.len() - 1)],
        n: scores.len(),
    })
}
