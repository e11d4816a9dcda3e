//! Diagonal-covariance Gaussian mixtures fitted with EM, seeded k-means++
//! initialization.

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const COVARIANCE_FLOOR: f64 = 1e-4;
const EM_MAX_ITERS: usize = 100;
const EM_LL_TOL: f64 = 1e-6;

/// Single diagonal Gaussian.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Gaussian {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl Gaussian {
    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.mean.len());
        let mut acc = 0.0;
        for d in 0..x.len() {
            let diff = x[d] - self.mean[d];
            acc += diff * diff / self.var[d] + (std::f64::consts::TAU * self.var[d]).ln();
        }
        -0.5 * acc
    }
}

/// Mixture of diagonal Gaussians; weights sum to 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianMixture {
    pub weights: Vec<f64>,
    pub components: Vec<Gaussian>,
}

impl GaussianMixture {
    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        let mut max = f64::NEG_INFINITY;
        let terms: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.components)
            .map(|(w, g)| {
                let t = w.ln() + g.log_pdf(x);
                if t > max {
                    max = t;
                }
                t
            })
            .collect();
        if max == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
    }

    /// Fit a `k`-component mixture by EM. Falls back to `samples.len()`
    /// components when fewer samples than `k` are available. Deterministic
    /// per seed. Returns the model and the per-iteration log-likelihood
    /// trace (non-decreasing).
    pub fn fit(samples: &[Vec<f64>], k: usize, seed: u64) -> Result<(Self, Vec<f64>)> {
        if samples.is_empty() {
            return Err(Error::InvalidInput("cannot fit GMM to zero samples".into()));
        }
        let dim = samples[0].len();
        if samples.iter().any(|s| s.len() != dim) {
            return Err(Error::ShapeMismatch("inconsistent sample dimensions".into()));
        }
        let k = k.max(1).min(samples.len());
        let n = samples.len();

        let centers = kmeans_pp_centers(samples, k, seed);
        // Initial components: cluster of nearest points around each center.
        let mut assign = vec![0usize; n];
        for (i, s) in samples.iter().enumerate() {
            assign[i] = centers
                .iter()
                .enumerate()
                .min_by(|a, b| {
                    sq_dist(s, a.1)
                        .partial_cmp(&sq_dist(s, b.1))
                        .unwrap()
                })
                .unwrap()
                .0;
        }
        let mut weights = vec![0f64; k];
        let mut components = Vec::with_capacity(k);
        for c in 0..k {
            let members: Vec<&Vec<f64>> = samples
                .iter()
                .zip(&assign)
                .filter(|(_, &a)| a == c)
                .map(|(s, _)| s)
                .collect();
            let count = members.len().max(1) as f64;
            weights[c] = count / n as f64;
            let mut mean = centers[c].clone();
            if !members.is_empty() {
                mean = vec![0.0; dim];
                for m in &members {
                    for d in 0..dim {
                        mean[d] += m[d] / count;
                    }
                }
            }
            let mut var = vec![0.0; dim];
            for m in &members {
                for d in 0..dim {
                    let diff = m[d] - mean[d];
                    var[d] += diff * diff / count;
                }
            }
            for v in &mut var {
                *v = v.max(COVARIANCE_FLOOR);
            }
            components.push(Gaussian { mean, var });
        }
        let wsum: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= wsum;
        }
        let mut model = GaussianMixture {
            weights,
            components,
        };

        let mut trace = Vec::new();
        let mut resp = vec![0f64; n * k];
        let mut prev_ll = f64::NEG_INFINITY;
        for _ in 0..EM_MAX_ITERS {
            // E-step
            let mut ll = 0.0;
            for (i, s) in samples.iter().enumerate() {
                let row = &mut resp[i * k..(i + 1) * k];
                let mut max = f64::NEG_INFINITY;
                for (c, r) in row.iter_mut().enumerate() {
                    *r = model.weights[c].ln() + model.components[c].log_pdf(s);
                    if *r > max {
                        max = *r;
                    }
                }
                let norm: f64 = row.iter().map(|r| (r - max).exp()).sum();
                ll += max + norm.ln();
                for r in row.iter_mut() {
                    *r = (*r - max).exp() / norm;
                }
            }
            trace.push(ll);
            if (ll - prev_ll).abs() < EM_LL_TOL {
                break;
            }
            prev_ll = ll;

            // M-step
            for c in 0..k {
                let rsum: f64 = (0..n).map(|i| resp[i * k + c]).sum();
                if rsum < 1e-12 {
                    continue; // keep previous parameters for a starved component
                }
                let mut mean = vec![0.0; dim];
                for (i, s) in samples.iter().enumerate() {
                    let r = resp[i * k + c];
                    for d in 0..dim {
                        mean[d] += r * s[d];
                    }
                }
                for m in &mut mean {
                    *m /= rsum;
                }
                let mut var = vec![0.0; dim];
                for (i, s) in samples.iter().enumerate() {
                    let r = resp[i * k + c];
                    for d in 0..dim {
                        let diff = s[d] - mean[d];
                        var[d] += r * diff * diff;
                    }
                }
                for v in &mut var {
                    *v = (*v / rsum).max(COVARIANCE_FLOOR);
                }
                model.weights[c] = rsum / n as f64;
                model.components[c] = Gaussian { mean, var };
            }
            let wsum: f64 = model.weights.iter().sum();
            for w in &mut model.weights {
                *w /= wsum;
            }
        }
        Ok((model, trace))
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn kmeans_pp_centers(samples: &[Vec<f64>], k: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = Vec::with_capacity(k);
    let first = rand::Rng::gen_range(&mut rng, 0..samples.len());
    centers.push(samples[first].clone());
    while centers.len() < k {
        let dists: Vec<f64> = samples
            .iter()
            .map(|s| {
                centers
                    .iter()
                    .map(|c| sq_dist(s, c))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = dists.iter().sum();
        let next = if total > 0.0 {
            WeightedIndex::new(&dists).map(|d| d.sample(&mut rng)).unwrap_or(0)
        } else {
            0 // all points coincide with a center; duplicate is harmless
        };
        centers.push(samples[next].clone());
    }
    centers
}
