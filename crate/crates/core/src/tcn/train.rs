//! Target encoding, learning-rate schedule and the training loops
//! (from scratch and fine-tuning).

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::audio::FeatureMatrix;
use crate::beats::BeatList;
use crate::error::{Error, Result};
use crate::tcn::net::{adam_step, forward, init_weights, loss, loss_and_gradients_train, AdamState};
use crate::tcn::{TcnConfig, TcnWeights};

/// Per-frame targets and frame weights for both heads.
#[derive(Debug, Clone)]
pub struct TargetSet {
    pub beat: Vec<f64>,
    pub beat_weight: Vec<f64>,
    pub downbeat: Vec<f64>,
    pub downbeat_weight: Vec<f64>,
}

/// Encode annotations as frame targets: 1 at the nearest frame to each event
/// with weight 1, the four neighboring frames (±1, ±2) get target 1 at
/// weight 0.5, everything else is target 0 at weight 1. Downbeat targets are
/// built the same way from position-1 events only.
pub fn targets_from_annotations(
    ann: &BeatList,
    frame_rate: f64,
    frame_offset: f64,
    n_frames: usize,
) -> Result<TargetSet> {
    let horizon = n_frames as f64 / frame_rate + frame_offset;
    let mut set = TargetSet {
        beat: vec![0.0; n_frames],
        beat_weight: vec![1.0; n_frames],
        downbeat: vec![0.0; n_frames],
        downbeat_weight: vec![1.0; n_frames],
    };
    // widen first, then pin the exact frames back to weight 1
    for e in &ann.events {
        if e.time < 0.0 || e.time > horizon {
            return Err(Error::AnnotationOutOfRange(format!(
                "event at {:.3} s outside [0, {horizon:.3}]",
                e.time
            )));
        }
        let center = ((e.time - frame_offset) * frame_rate).round() as i64;
        for off in [-2i64, -1, 1, 2] {
            let k = center + off;
            if k < 0 || k >= n_frames as i64 {
                continue;
            }
            set.beat[k as usize] = 1.0;
            set.beat_weight[k as usize] = 0.5;
            if e.position == Some(1) {
                set.downbeat[k as usize] = 1.0;
                set.downbeat_weight[k as usize] = 0.5;
            }
        }
    }
    for e in &ann.events {
        let center = ((e.time - frame_offset) * frame_rate).round() as i64;
        if center >= 0 && center < n_frames as i64 {
            set.beat[center as usize] = 1.0;
            set.beat_weight[center as usize] = 1.0;
            if e.position == Some(1) {
                set.downbeat[center as usize] = 1.0;
                set.downbeat_weight[center as usize] = 1.0;
            }
        }
    }
    Ok(set)
}

/// Learning-rate schedule and stopping rules.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct TrainSchedule {
    pub initial_lr: f64,
    /// Epochs without improvement before the learning rate is reduced.
    pub plateau_patience: usize,
    pub lr_factor: f64,
    pub max_epochs: usize,
    /// Epochs without improvement before training stops.
    pub early_stop_patience: usize,
}

impl TrainSchedule {
    /// Defaults for training from scratch.
    pub fn from_scratch() -> Self {
        Self {
            initial_lr: 0.005,
            plateau_patience: 10,
            lr_factor: 0.2,
            max_epochs: 100,
            early_stop_patience: 20,
        }
    }

    /// Fine-tuning defaults: a fifth of the from-scratch learning rate.
    pub fn finetune() -> Self {
        Self {
            initial_lr: 0.001,
            ..Self::from_scratch()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0 < self.lr_factor && self.lr_factor < 1.0) {
            return Err(Error::InvalidInput(format!(
                "lr_factor must be in (0, 1), got {}",
                self.lr_factor
            )));
        }
        if self.initial_lr <= 0.0 {
            return Err(Error::InvalidInput("initial_lr must be positive".into()));
        }
        Ok(())
    }
}

/// Improvement threshold: strictly lower validation loss by at least this
/// amount counts as progress.
const IMPROVEMENT_EPS: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lr: f64,
    pub n_snippets: usize,
}

#[derive(Debug, Clone, Default)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn best_val_loss(&self) -> f64 {
        self.epochs
            .iter()
            .map(|e| e.val_loss)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let display = path.display().to_string();
        let mut out = std::io::BufWriter::new(
            std::fs::File::create(path).map_err(|e| Error::io(&display, e))?,
        );
        writeln!(out, "epoch,train_loss,val_loss,lr,n_snippets")
            .map_err(|e| Error::io(&display, e))?;
        for r in &self.epochs {
            writeln!(
                out,
                "{},{:.8},{:.8},{:.6},{}",
                r.epoch, r.train_loss, r.val_loss, r.lr, r.n_snippets
            )
            .map_err(|e| Error::io(&display, e))?;
        }
        Ok(())
    }
}

/// One training example: features plus its annotations.
pub type TrainExample = (FeatureMatrix, BeatList);

fn encode(example: &TrainExample) -> Result<(/* features */ &FeatureMatrix, TargetSet)> {
    let (features, ann) = example;
    let targets =
        targets_from_annotations(ann, features.frame_rate, features.frame_offset, features.n_frames())?;
    Ok((features, targets))
}

fn mean_loss(weights: &TcnWeights, set: &[(&FeatureMatrix, TargetSet)]) -> Result<f64> {
    let mut acc = 0.0;
    for (features, targets) in set {
        let acts = forward(weights, features, false)?;
        acc += loss(&acts, targets)?;
    }
    Ok(acc / set.len() as f64)
}

/// Train a fresh network. Epoch 0 in the history is the evaluation of the
/// initial weights before any update; the returned weights are the ones from
/// the best-validation epoch.
pub fn train_from_scratch(
    config: &TcnConfig,
    schedule: &TrainSchedule,
    train_set: &[TrainExample],
    val_set: &[TrainExample],
) -> Result<(TcnWeights, TrainHistory)> {
    let weights = init_weights(config)?;
    run_training(weights, schedule, train_set, val_set)
}

/// Continue training from pretrained weights (all layers trainable).
pub fn finetune(
    pretrained: TcnWeights,
    schedule: &TrainSchedule,
    train_set: &[TrainExample],
    val_set: &[TrainExample],
) -> Result<(TcnWeights, TrainHistory)> {
    pretrained.config.validate()?;
    run_training(pretrained, schedule, train_set, val_set)
}

fn run_training(
    mut weights: TcnWeights,
    schedule: &TrainSchedule,
    train_set: &[TrainExample],
    val_set: &[TrainExample],
) -> Result<(TcnWeights, TrainHistory)> {
    schedule.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::InvalidInput(
            "training needs non-empty train and validation sets".into(),
        ));
    }
    let train: Vec<(&FeatureMatrix, TargetSet)> =
        train_set.iter().map(encode).collect::<Result<_>>()?;
    let val: Vec<(&FeatureMatrix, TargetSet)> =
        val_set.iter().map(encode).collect::<Result<_>>()?;

    let mut history = TrainHistory::default();
    let mut lr = schedule.initial_lr;

    // epoch 0: evaluation before any update
    let initial_val = mean_loss(&weights, &val)?;
    history.epochs.push(EpochRecord {
        epoch: 0,
        train_loss: mean_loss(&weights, &train)?,
        val_loss: initial_val,
        lr,
        n_snippets: train.len(),
    });

    let mut best_val = initial_val;
    let mut best_weights = weights.clone();
    let mut adam = AdamState::new(&weights);
    let mut rng = ChaCha8Rng::seed_from_u64(weights.config.seed.wrapping_add(0x7261696e));
    let mut since_improvement = 0usize;
    let mut since_lr_drop = 0usize;

    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=schedule.max_epochs {
        order.shuffle(&mut rng);
        let mut train_loss_acc = 0.0;
        for &i in &order {
            let (features, targets) = &train[i];
            let (sample_loss, grads) =
                loss_and_gradients_train(&weights, features, targets, &mut rng)?;
            adam_step(&mut weights, &grads, &mut adam, lr)?;
            train_loss_acc += sample_loss;
        }
        let val_loss = mean_loss(&weights, &val)?;
        if val_loss < best_val - IMPROVEMENT_EPS {
            best_val = val_loss;
            best_weights = weights.clone();
            since_improvement = 0;
            since_lr_drop = 0;
        } else {
            since_improvement += 1;
            since_lr_drop += 1;
        }
        if since_lr_drop >= schedule.plateau_patience {
            lr *= schedule.lr_factor;
            since_lr_drop = 0;
        }
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: train_loss_acc / train.len() as f64,
            val_loss,
            lr,
            n_snippets: train.len(),
        });
        if since_improvement >= schedule.early_stop_patience {
            break;
        }
    }
    Ok((best_weights, history))
}
