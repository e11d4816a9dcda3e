//! Forward pass, analytic backpropagation and the Adam update.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::audio::FeatureMatrix;
use crate::error::{Error, Result};
use crate::tcn::{ActivationPair, ConvLayer, Head, TcnConfig, TcnWeights};

use super::train::TargetSet;

const BCE_EPS: f64 = 1e-12;

/// He-style fan-in initialization, deterministic per `config.seed`.
pub fn init_weights(config: &TcnConfig) -> Result<TcnWeights> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut layers = Vec::with_capacity(config.n_layers);
    let mut in_ch = config.n_bands;
    for &dilation in &config.dilations {
        let out_ch = config.base_channels;
        let fan_in = (in_ch * config.kernel_size) as f64;
        let std = (2.0 / fan_in).sqrt();
        let w = (0..out_ch * config.kernel_size * in_ch)
            .map(|_| std * rng.sample::<f64, _>(StandardNormal))
            .collect();
        layers.push(ConvLayer {
            w,
            b: vec![0.0; out_ch],
            in_ch,
            out_ch,
            kernel: config.kernel_size,
            dilation,
        });
        in_ch = out_ch;
    }
    let head = |rng: &mut ChaCha8Rng| Head {
        w: (0..config.base_channels)
            .map(|_| (1.0 / config.base_channels as f64).sqrt() * rng.sample::<f64, _>(StandardNormal))
            .collect(),
        b: 0.0,
    };
    let beat_head = head(&mut rng);
    let downbeat_head = head(&mut rng);
    Ok(TcnWeights {
        config: config.clone(),
        layers,
        beat_head,
        downbeat_head,
    })
}

fn elu(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        z.exp() - 1.0
    }
}

fn elu_grad(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        z.exp()
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Centered dilated convolution: frames outside the input are zero.
fn conv_forward(layer: &ConvLayer, input: &[f64], n_frames: usize, out: &mut Vec<f64>) {
    let (in_ch, out_ch, kernel, dilation) = (layer.in_ch, layer.out_ch, layer.kernel, layer.dilation);
    let center = (kernel / 2) as i64;
    out.clear();
    out.resize(n_frames * out_ch, 0.0);
    for t in 0..n_frames {
        let row = &mut out[t * out_ch..(t + 1) * out_ch];
        for (oc, o) in row.iter_mut().enumerate() {
            let mut acc = layer.b[oc];
            for k in 0..kernel {
                let s = t as i64 + (k as i64 - center) * dilation as i64;
                if s < 0 || s >= n_frames as i64 {
                    continue;
                }
                let w_row = &layer.w[(oc * kernel + k) * in_ch..(oc * kernel + k + 1) * in_ch];
                let x_row = &input[s as usize * in_ch..(s as usize + 1) * in_ch];
                acc += w_row.iter().zip(x_row).map(|(w, x)| w * x).sum::<f64>();
            }
            *o = acc;
        }
    }
}

/// Everything the backward pass needs from a forward pass.
struct ForwardCache {
    /// Layer inputs (index 0 is the feature matrix copy).
    inputs: Vec<Vec<f64>>,
    /// Pre-activation values per layer.
    pre_acts: Vec<Vec<f64>>,
    /// Dropout masks per layer (empty when dropout was off).
    masks: Vec<Vec<f64>>,
    /// Final hidden activations feeding the heads.
    hidden: Vec<f64>,
    beat: Vec<f64>,
    downbeat: Vec<f64>,
    n_frames: usize,
}

fn forward_full(
    weights: &TcnWeights,
    features: &FeatureMatrix,
    dropout_rng: Option<&mut ChaCha8Rng>,
) -> Result<ForwardCache> {
    if features.n_bands != weights.config.n_bands {
        return Err(Error::ShapeMismatch(format!(
            "features have {} bands, network expects {}",
            features.n_bands, weights.config.n_bands
        )));
    }
    let n_frames = features.n_frames();
    let p = weights.config.dropout_rate;
    let mut rng = dropout_rng;

    let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(weights.layers.len());
    let mut pre_acts = Vec::with_capacity(weights.layers.len());
    let mut masks = Vec::with_capacity(weights.layers.len());
    let mut x = features.data.clone();
    let mut z = Vec::new();
    for layer in &weights.layers {
        conv_forward(layer, &x, n_frames, &mut z);
        inputs.push(std::mem::take(&mut x));
        let mut a: Vec<f64> = z.iter().map(|&v| elu(v)).collect();
        let mask = if let Some(rng) = rng.as_deref_mut() {
            if p > 0.0 {
                let keep = 1.0 - p;
                let mask: Vec<f64> = (0..a.len())
                    .map(|_| {
                        if rng.gen::<f64>() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    })
                    .collect();
                for (v, m) in a.iter_mut().zip(&mask) {
                    *v *= m;
                }
                mask
            } else {
                Vec::new()
            }
        } else {
            Vec::new()
        };
        pre_acts.push(z.clone());
        masks.push(mask);
        x = a;
    }

    let ch = weights.config.base_channels;
    let mut beat = vec![0.0; n_frames];
    let mut downbeat = vec![0.0; n_frames];
    for t in 0..n_frames {
        let h = &x[t * ch..(t + 1) * ch];
        let zb: f64 = weights.beat_head.b
            + weights
                .beat_head
                .w
                .iter()
                .zip(h)
                .map(|(w, a)| w * a)
                .sum::<f64>();
        let zd: f64 = weights.downbeat_head.b
            + weights
                .downbeat_head
                .w
                .iter()
                .zip(h)
                .map(|(w, a)| w * a)
                .sum::<f64>();
        beat[t] = sigmoid(zb);
        downbeat[t] = sigmoid(zd);
    }
    Ok(ForwardCache {
        inputs,
        pre_acts,
        masks,
        hidden: x,
        beat,
        downbeat,
        n_frames,
    })
}

/// Per-frame activations. In train mode, dropout is applied with masks drawn
/// deterministically from `config.seed`; in inference mode the pass is pure.
pub fn forward(
    weights: &TcnWeights,
    features: &FeatureMatrix,
    train_mode: bool,
) -> Result<ActivationPair> {
    let cache = if train_mode {
        let mut rng = ChaCha8Rng::seed_from_u64(weights.config.seed);
        forward_full(weights, features, Some(&mut rng))?
    } else {
        forward_full(weights, features, None)?
    };
    Ok(ActivationPair {
        beat: cache.beat,
        downbeat: cache.downbeat,
        frame_rate: features.frame_rate,
        frame_offset: features.frame_offset,
    })
}

fn head_loss(acts: &[f64], targets: &[f64], weights_mask: &[f64]) -> f64 {
    let wsum: f64 = weights_mask.iter().sum();
    if wsum == 0.0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for ((&a, &y), &w) in acts.iter().zip(targets).zip(weights_mask) {
        let a = a.clamp(BCE_EPS, 1.0 - BCE_EPS);
        acc += w * -(y * a.ln() + (1.0 - y) * (1.0 - a).ln());
    }
    acc / wsum
}

/// Mean of the two heads' frame-weighted binary cross-entropies.
pub fn loss(acts: &ActivationPair, targets: &TargetSet) -> Result<f64> {
    if acts.beat.len() != targets.beat.len() || acts.downbeat.len() != targets.downbeat.len() {
        return Err(Error::ShapeMismatch(format!(
            "activations of {} frames, targets of {}",
            acts.beat.len(),
            targets.beat.len()
        )));
    }
    Ok(0.5 * head_loss(&acts.beat, &targets.beat, &targets.beat_weight)
        + 0.5 * head_loss(&acts.downbeat, &targets.downbeat, &targets.downbeat_weight))
}

/// Gradients with the same shapes as the weights.
#[derive(Debug, Clone)]
pub struct TcnGradients {
    pub layers: Vec<ConvLayer>,
    pub beat_head: Head,
    pub downbeat_head: Head,
}

fn zero_like(weights: &TcnWeights) -> TcnGradients {
    TcnGradients {
        layers: weights
            .layers
            .iter()
            .map(|l| ConvLayer {
                w: vec![0.0; l.w.len()],
                b: vec![0.0; l.b.len()],
                ..*l
            })
            .collect(),
        beat_head: Head {
            w: vec![0.0; weights.beat_head.w.len()],
            b: 0.0,
        },
        downbeat_head: Head {
            w: vec![0.0; weights.downbeat_head.w.len()],
            b: 0.0,
        },
    }
}

/// Exact analytic gradient of [`loss`] with dropout disabled.
pub fn gradients(
    weights: &TcnWeights,
    features: &FeatureMatrix,
    targets: &TargetSet,
) -> Result<(f64, TcnGradients)> {
    let cache = forward_full(weights, features, None)?;
    backward(weights, &cache, targets)
}

/// Training step core: forward with optional dropout, then backward.
pub(crate) fn loss_and_gradients_train(
    weights: &TcnWeights,
    features: &FeatureMatrix,
    targets: &TargetSet,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, TcnGradients)> {
    let cache = if weights.config.dropout_rate > 0.0 {
        forward_full(weights, features, Some(rng))?
    } else {
        forward_full(weights, features, None)?
    };
    backward(weights, &cache, targets)
}

fn backward(
    weights: &TcnWeights,
    cache: &ForwardCache,
    targets: &TargetSet,
) -> Result<(f64, TcnGradients)> {
    let n_frames = cache.n_frames;
    if targets.beat.len() != n_frames {
        return Err(Error::ShapeMismatch(format!(
            "targets of {} frames, features of {n_frames}",
            targets.beat.len()
        )));
    }
    let acts = ActivationPair {
        beat: cache.beat.clone(),
        downbeat: cache.downbeat.clone(),
        frame_rate: 0.0,
        frame_offset: 0.0,
    };
    let loss_value = loss(&acts, targets)?;

    let mut grads = zero_like(weights);
    let ch = weights.config.base_channels;

    // dL/dz for each head: 0.5 * w_t * (a - y) / sum(w)
    let beat_wsum: f64 = targets.beat_weight.iter().sum();
    let down_wsum: f64 = targets.downbeat_weight.iter().sum();
    let mut d_hidden = vec![0.0; cache.hidden.len()];
    for t in 0..n_frames {
        let dzb = if beat_wsum > 0.0 {
            0.5 * targets.beat_weight[t] * (cache.beat[t] - targets.beat[t]) / beat_wsum
        } else {
            0.0
        };
        let dzd = if down_wsum > 0.0 {
            0.5 * targets.downbeat_weight[t] * (cache.downbeat[t] - targets.downbeat[t]) / down_wsum
        } else {
            0.0
        };
        let h = &cache.hidden[t * ch..(t + 1) * ch];
        for c in 0..ch {
            grads.beat_head.w[c] += dzb * h[c];
            grads.downbeat_head.w[c] += dzd * h[c];
        }
        grads.beat_head.b += dzb;
        grads.downbeat_head.b += dzd;
        let dh = &mut d_hidden[t * ch..(t + 1) * ch];
        for c in 0..ch {
            dh[c] = dzb * weights.beat_head.w[c] + dzd * weights.downbeat_head.w[c];
        }
    }

    // Backward through the layer stack.
    let mut d_out = d_hidden;
    for (li, layer) in weights.layers.iter().enumerate().rev() {
        // through dropout then ELU
        let mask = &cache.masks[li];
        let pre = &cache.pre_acts[li];
        for (i, d) in d_out.iter_mut().enumerate() {
            if !mask.is_empty() {
                *d *= mask[i];
            }
            *d *= elu_grad(pre[i]);
        }
        let input = &cache.inputs[li];
        let (in_ch, out_ch, kernel, dilation) =
            (layer.in_ch, layer.out_ch, layer.kernel, layer.dilation);
        let center = (kernel / 2) as i64;
        let g = &mut grads.layers[li];
        let mut d_in = vec![0.0; input.len()];
        for t in 0..n_frames {
            let d_row = &d_out[t * out_ch..(t + 1) * out_ch];
            for (oc, &dz) in d_row.iter().enumerate() {
                if dz == 0.0 {
                    continue;
                }
                g.b[oc] += dz;
                for k in 0..kernel {
                    let s = t as i64 + (k as i64 - center) * dilation as i64;
                    if s < 0 || s >= n_frames as i64 {
                        continue;
                    }
                    let s = s as usize;
                    let x_row = &input[s * in_ch..(s + 1) * in_ch];
                    let gw = &mut g.w[(oc * kernel + k) * in_ch..(oc * kernel + k + 1) * in_ch];
                    let wv = &layer.w[(oc * kernel + k) * in_ch..(oc * kernel + k + 1) * in_ch];
                    let di = &mut d_in[s * in_ch..(s + 1) * in_ch];
                    for ic in 0..in_ch {
                        gw[ic] += dz * x_row[ic];
                        di[ic] += dz * wv[ic];
                    }
                }
            }
        }
        d_out = d_in;
    }
    Ok((loss_value, grads))
}

/// Optimizer state: first and second moment estimates per parameter.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl AdamState {
    pub fn new(weights: &TcnWeights) -> Self {
        let n = weights.n_params();
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }
}

fn visit_params(weights: &mut TcnWeights, mut f: impl FnMut(usize, &mut f64)) {
    let mut idx = 0;
    for layer in &mut weights.layers {
        for w in layer.w.iter_mut().chain(layer.b.iter_mut()) {
            f(idx, w);
            idx += 1;
        }
    }
    for head in [&mut weights.beat_head, &mut weights.downbeat_head] {
        for w in head.w.iter_mut() {
            f(idx, w);
            idx += 1;
        }
        f(idx, &mut head.b);
        idx += 1;
    }
}

fn collect_grads(grads: &TcnGradients) -> Vec<f64> {
    let mut out = Vec::new();
    for layer in &grads.layers {
        out.extend_from_slice(&layer.w);
        out.extend_from_slice(&layer.b);
    }
    for head in [&grads.beat_head, &grads.downbeat_head] {
        out.extend_from_slice(&head.w);
        out.push(head.b);
    }
    out
}

/// One bias-corrected Adam update (beta1 = 0.9, beta2 = 0.999, eps = 1e-8).
pub fn adam_step(
    weights: &mut TcnWeights,
    grads: &TcnGradients,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    let flat = collect_grads(grads);
    if flat.len() != state.m.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} gradients for {} optimizer slots",
            flat.len(),
            state.m.len()
        )));
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - ADAM_BETA1.powi(t);
    let bc2 = 1.0 - ADAM_BETA2.powi(t);
    let (m, v) = (&mut state.m, &mut state.v);
    visit_params(weights, |i, w| {
        let g = flat[i];
        m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g;
        v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        *w -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    });
    Ok(())
}
