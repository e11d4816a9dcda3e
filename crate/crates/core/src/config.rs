//! Structured configuration file: every tunable of the feature front end,
//! the models, the schedules and the decoders, with documented defaults.
//! Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bayes::BayesTrainConfig;
use crate::decode::{DbnConfig, TempoRange};
use crate::error::{Error, Result};
use crate::metrics::MetricParams;
use crate::strategy::{FrontEndConfig, StrategyContext};
use crate::tcn::{TcnConfig, TrainSchedule};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeaturesSection {
    pub window_size: usize,
    pub hop_size: usize,
    pub filterbank_fmin: f64,
    pub filterbank_fmax: f64,
    pub flux_split_hz: f64,
    pub log_compress: bool,
}

impl Default for FeaturesSection {
    fn default() -> Self {
        let fe = FrontEndConfig::default();
        Self {
            window_size: fe.window_size,
            hop_size: fe.hop_size,
            filterbank_fmin: fe.filterbank_fmin,
            filterbank_fmax: fe.filterbank_fmax,
            flux_split_hz: fe.flux_split_hz,
            log_compress: fe.log_compress,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TcnSection {
    pub n_layers: usize,
    pub base_channels: usize,
    pub kernel_size: usize,
    pub dilations: Vec<usize>,
    pub dropout_rate: f64,
}

impl Default for TcnSection {
    fn default() -> Self {
        let c = TcnConfig::default_for_bands(81);
        Self {
            n_layers: c.n_layers,
            base_channels: c.base_channels,
            kernel_size: c.kernel_size,
            dilations: c.dilations,
            dropout_rate: c.dropout_rate,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleSection {
    pub initial_lr: f64,
    pub plateau_patience: usize,
    pub lr_factor: f64,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
}

impl ScheduleSection {
    fn from_schedule(s: TrainSchedule) -> Self {
        Self {
            initial_lr: s.initial_lr,
            plateau_patience: s.plateau_patience,
            lr_factor: s.lr_factor,
            max_epochs: s.max_epochs,
            early_stop_patience: s.early_stop_patience,
        }
    }

    fn to_schedule(&self) -> TrainSchedule {
        TrainSchedule {
            initial_lr: self.initial_lr,
            plateau_patience: self.plateau_patience,
            lr_factor: self.lr_factor,
            max_epochs: self.max_epochs,
            early_stop_patience: self.early_stop_patience,
        }
    }
}

impl Default for ScheduleSection {
    fn default() -> Self {
        Self::from_schedule(TrainSchedule::from_scratch())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchedulesSection {
    pub fs: ScheduleSection,
    pub ft: ScheduleSection,
}

impl Default for SchedulesSection {
    fn default() -> Self {
        Self {
            fs: ScheduleSection::from_schedule(TrainSchedule::from_scratch()),
            ft: ScheduleSection::from_schedule(TrainSchedule::finetune()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BayesSection {
    pub bins_per_beat: u32,
    pub n_positions: usize,
    pub tempo_change_prob: f64,
    pub gmm_components: usize,
    pub tempo_pad: f64,
}

impl Default for BayesSection {
    fn default() -> Self {
        let c = BayesTrainConfig::default();
        Self {
            bins_per_beat: c.bins_per_beat,
            n_positions: c.n_positions,
            tempo_change_prob: c.tempo_change_prob,
            gmm_components: c.gmm_components,
            tempo_pad: c.tempo_pad,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecodeSection {
    pub min_bpm: f64,
    pub max_bpm: f64,
    pub interior_share: f64,
    pub tempo_change_prob: f64,
    /// Bar-length candidates for the downbeat decoder; empty means "use the
    /// manifest's meter".
    pub meter_options: Vec<u32>,
}

impl Default for DecodeSection {
    fn default() -> Self {
        let d = DbnConfig::default();
        Self {
            min_bpm: TempoRange::GENERIC.min_bpm,
            max_bpm: TempoRange::GENERIC.max_bpm,
            interior_share: d.interior_share,
            tempo_change_prob: d.tempo_change_prob,
            meter_options: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub window: f64,
    pub phase_tol: f64,
    pub period_tol: f64,
    /// Drop events before this many seconds (0 evaluates full tracks).
    pub skip_seconds: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        let p = MetricParams::default();
        Self {
            window: p.window,
            phase_tol: p.phase_tol,
            period_tol: p.period_tol,
            skip_seconds: p.skip_seconds,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct PathsSection {
    /// TCN checkpoint used by the ft/fta strategies.
    pub pretrained: Option<PathBuf>,
}

/// Top-level configuration, loaded from TOML.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct CliConfig {
    pub features: FeaturesSection,
    pub tcn: TcnSection,
    pub schedule: SchedulesSection,
    pub bayes: BayesSection,
    pub decode: DecodeSection,
    pub eval: EvalSection,
    pub paths: PathsSection,
}

impl CliConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let display = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(&display, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{display}: {e}")))
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn front_end(&self) -> FrontEndConfig {
        FrontEndConfig {
            window_size: self.features.window_size,
            hop_size: self.features.hop_size,
            filterbank_fmin: self.features.filterbank_fmin,
            filterbank_fmax: self.features.filterbank_fmax,
            flux_split_hz: self.features.flux_split_hz,
            log_compress: self.features.log_compress,
        }
    }

    pub fn metric_params(&self) -> MetricParams {
        MetricParams {
            window: self.eval.window,
            phase_tol: self.eval.phase_tol,
            period_tol: self.eval.period_tol,
            skip_seconds: self.eval.skip_seconds,
        }
    }

    pub fn tempo_range(&self) -> Result<TempoRange> {
        TempoRange::new(self.decode.min_bpm, self.decode.max_bpm)
    }

    /// Build the strategy context for one run.
    pub fn strategy_context(&self, seed: u64) -> Result<StrategyContext> {
        let tempo_range = self.tempo_range()?;
        Ok(StrategyContext {
            front_end: self.front_end(),
            tcn: TcnConfig {
                n_bands: 0, // filled from extracted features at train time
                n_layers: self.tcn.n_layers,
                base_channels: self.tcn.base_channels,
                kernel_size: self.tcn.kernel_size,
                dilations: self.tcn.dilations.clone(),
                dropout_rate: self.tcn.dropout_rate,
                seed,
            },
            schedule_fs: self.schedule.fs.to_schedule(),
            schedule_ft: self.schedule.ft.to_schedule(),
            bayes: BayesTrainConfig {
                beats_per_bar: 4, // replaced with the data's meter at train time
                bins_per_beat: self.bayes.bins_per_beat,
                n_positions: self.bayes.n_positions,
                tempo_change_prob: self.bayes.tempo_change_prob,
                gmm_components: self.bayes.gmm_components,
                tempo_pad: self.bayes.tempo_pad,
                seed,
            },
            decode: DbnConfig {
                interior_share: self.decode.interior_share,
                tempo_change_prob: self.decode.tempo_change_prob,
            },
            tempo_range,
            meter_options: self.decode.meter_options.clone(),
            pretrained_path: self.paths.pretrained.clone(),
            seed,
        })
    }
}
