//! Temporal convolutional network for per-frame beat/downbeat activations:
//! a stack of centered dilated convolutions with ELU nonlinearities and two
//! sigmoid heads, trained on the CPU with exact analytic gradients.

mod net;
mod train;

pub use net::{adam_step, forward, gradients, init_weights, loss, AdamState, TcnGradients};
pub use train::{
    finetune, targets_from_annotations, train_from_scratch, EpochRecord, TargetSet,
    TrainHistory, TrainSchedule,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Network architecture parameters.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TcnConfig {
    /// Input feature bands.
    pub n_bands: usize,
    pub n_layers: usize,
    pub base_channels: usize,
    /// Odd kernel width.
    pub kernel_size: usize,
    /// Per-layer dilation factors, strictly increasing.
    pub dilations: Vec<usize>,
    pub dropout_rate: f64,
    pub seed: u64,
}

impl TcnConfig {
    /// Desk-scale default: 8 dilated layers (1..128), 16 channels, kernel 5.
    pub fn default_for_bands(n_bands: usize) -> Self {
        Self {
            n_bands,
            n_layers: 8,
            base_channels: 16,
            kernel_size: 5,
            dilations: (0..8).map(|i| 1 << i).collect(),
            dropout_rate: 0.1,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_bands == 0 || self.n_layers == 0 || self.base_channels == 0 {
            return Err(Error::InvalidInput("zero-sized network dimension".into()));
        }
        if self.kernel_size % 2 == 0 {
            return Err(Error::InvalidInput(format!(
                "kernel_size must be odd, got {}",
                self.kernel_size
            )));
        }
        if self.dilations.len() != self.n_layers {
            return Err(Error::InvalidInput(format!(
                "{} dilations for {} layers",
                self.dilations.len(),
                self.n_layers
            )));
        }
        if self.dilations.windows(2).any(|w| w[1] <= w[0]) || self.dilations[0] == 0 {
            return Err(Error::InvalidInput(
                "dilations must be strictly increasing and positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidInput(
                "dropout_rate must be in [0, 1)".into(),
            ));
        }
        Ok(())
    }

    /// One-sided receptive field in frames: sum of dilation * (kernel-1)/2.
    pub fn receptive_field(&self) -> usize {
        let half = (self.kernel_size - 1) / 2;
        self.dilations.iter().map(|d| d * half).sum()
    }
}

/// One dilated convolution layer. Weights are stored as
/// `[out_ch][kernel][in_ch]` row-major.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ConvLayer {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub dilation: usize,
}

/// 1x1 convolution head (one weight per channel plus bias).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Head {
    pub w: Vec<f64>,
    pub b: f64,
}

/// Full parameter set: dilated layers plus the beat and downbeat heads.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TcnWeights {
    pub config: TcnConfig,
    pub layers: Vec<ConvLayer>,
    pub beat_head: Head,
    pub downbeat_head: Head,
}

impl TcnWeights {
    /// Total parameter count.
    pub fn n_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.w.len() + l.b.len())
            .sum::<usize>()
            + self.beat_head.w.len()
            + self.downbeat_head.w.len()
            + 2
    }
}

/// Per-frame beat and downbeat likelihoods, all values in (0, 1).
#[derive(Debug, Clone)]
pub struct ActivationPair {
    pub beat: Vec<f64>,
    pub downbeat: Vec<f64>,
    pub frame_rate: f64,
    pub frame_offset: f64,
}
