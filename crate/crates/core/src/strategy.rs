//! Training-strategy registry: each way of producing a tracker (Bayesian
//! training, TCN from scratch, fine-tuning, and their frame-rate-augmented
//! variants) sits behind a common trait, registered by name and selected at
//! runtime.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::audio::{
    frame_rate_variants, log_filterbank_features, spectral_flux, stft, AudioBuffer, FeatureMatrix,
    OnsetEnvelope, Spectrogram,
};
use crate::bayes::{bayes_track, bayes_train, BarPointerModel, BayesTrainConfig};
use crate::beats::BeatList;
use crate::decode::{dbn_beat_decode, dbn_downbeat_decode, DbnConfig, TempoRange};
use crate::error::{Error, Result};
use crate::harness::{Snippet, SnippetMode, SnippetSet};
use crate::tcn::{
    finetune, forward, train_from_scratch, TcnConfig, TcnWeights, TrainHistory, TrainSchedule,
};

/// Front-end parameters shared by every tracker.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FrontEndConfig {
    pub window_size: usize,
    pub hop_size: usize,
    pub filterbank_fmin: f64,
    pub filterbank_fmax: f64,
    /// Split point of the two-band flux observation.
    pub flux_split_hz: f64,
    pub log_compress: bool,
}

impl Default for FrontEndConfig {
    fn default() -> Self {
        Self {
            window_size: 2048,
            hop_size: 441,
            filterbank_fmin: 30.0,
            filterbank_fmax: 17000.0,
            flux_split_hz: 250.0,
            log_compress: true,
        }
    }
}

impl FrontEndConfig {
    pub fn spectrogram(&self, audio: &AudioBuffer) -> Result<Spectrogram> {
        stft(audio, self.window_size, self.hop_size)
    }

    pub fn base_frame_rate(&self, sample_rate: u32) -> f64 {
        sample_rate as f64 / self.hop_size as f64
    }

    /// Hop size approximating a target frame rate (frame rates are exact
    /// only when the hop divides the sample rate).
    pub fn hop_for_rate(&self, sample_rate: u32, target_fps: f64) -> usize {
        ((sample_rate as f64 / target_fps).round() as usize).max(1)
    }

    pub fn tcn_features(&self, spec: &Spectrogram) -> Result<FeatureMatrix> {
        log_filterbank_features(spec, self.filterbank_fmin, self.filterbank_fmax)
    }

    pub fn flux_envelope(&self, spec: &Spectrogram) -> Result<OnsetEnvelope> {
        let nyquist = spec.bin_freqs.last().copied().unwrap_or(self.flux_split_hz);
        spectral_flux(
            spec,
            &[
                (0.0, self.flux_split_hz),
                (self.flux_split_hz, nyquist + 1.0),
            ],
            self.log_compress,
        )
    }
}

/// Features a tracker consumes, derived once per track from one spectrogram.
#[derive(Debug, Clone)]
pub struct TrackFeatures {
    pub tcn: FeatureMatrix,
    pub flux: OnsetEnvelope,
}

impl TrackFeatures {
    pub fn from_audio(audio: &AudioBuffer, front_end: &FrontEndConfig) -> Result<Self> {
        let spec = front_end.spectrogram(audio)?;
        Ok(Self {
            tcn: front_end.tcn_features(&spec)?,
            flux: front_end.flux_envelope(&spec)?,
        })
    }
}

/// A tracker's estimates for one track: a beat-only list from the beat
/// decoder and a positioned list from the downbeat decoder.
#[derive(Debug, Clone)]
pub struct TrackOutput {
    pub beats: BeatList,
    pub downbeats: BeatList,
}

/// Everything a strategy needs besides the snippets.
#[derive(Debug, Clone)]
pub struct StrategyContext {
    pub front_end: FrontEndConfig,
    pub tcn: TcnConfig,
    pub schedule_fs: TrainSchedule,
    pub schedule_ft: TrainSchedule,
    pub bayes: BayesTrainConfig,
    pub decode: DbnConfig,
    pub tempo_range: TempoRange,
    /// Bar length candidates for the downbeat decoder; when empty the
    /// snippets' meter is used.
    pub meter_options: Vec<u32>,
    pub pretrained_path: Option<PathBuf>,
    pub seed: u64,
}

impl StrategyContext {
    pub fn new(seed: u64) -> Self {
        Self {
            front_end: FrontEndConfig::default(),
            tcn: TcnConfig::default_for_bands(81),
            schedule_fs: TrainSchedule::from_scratch(),
            schedule_ft: TrainSchedule::finetune(),
            bayes: BayesTrainConfig::default(),
            decode: DbnConfig::default(),
            tempo_range: TempoRange::GENERIC,
            meter_options: Vec::new(),
            pretrained_path: None,
            seed,
        }
    }

    fn meter_options_for(&self, beats_per_bar: u32) -> Vec<u32> {
        if self.meter_options.is_empty() {
            vec![beats_per_bar]
        } else {
            self.meter_options.clone()
        }
    }
}

/// Diagnostics recorded while training one cell.
#[derive(Debug, Clone, Default)]
pub struct TrainLog {
    pub history: Option<TrainHistory>,
    /// Snippets visited per epoch (augmented strategies see five-fold).
    pub per_epoch_snippets: usize,
    /// Frame rates the training features were extracted at.
    pub frame_rates: Vec<f64>,
}

/// A trained tracker ready to process full-length tracks.
pub trait TrainedTracker: Send + Sync {
    fn kind(&self) -> &'static str;
    fn track(&self, features: &TrackFeatures) -> Result<TrackOutput>;
    fn save(&self, path: &Path) -> Result<()>;
}

/// One way of training a tracker from annotated snippets.
pub trait Strategy: Send + Sync {
    /// Registry key (also the results-table label, upper-cased).
    fn name(&self) -> &'static str;
    /// How the 10-second snippet window is divided for this strategy.
    fn snippet_mode(&self) -> SnippetMode;
    fn train(
        &self,
        snippets: &SnippetSet,
        ctx: &StrategyContext,
    ) -> Result<(Box<dyn TrainedTracker>, TrainLog)>;
}

/// Name-keyed strategy registry.
pub struct StrategyRegistry {
    strategies: Vec<Box<dyn Strategy>>,
}

impl StrategyRegistry {
    /// All built-in strategies: bayes, fs, ft, fsa, fta.
    pub fn builtin() -> Self {
        Self {
            strategies: vec![
                Box::new(BayesStrategy),
                Box::new(TcnStrategy { pretrained: false, augmented: false }),
                Box::new(TcnStrategy { pretrained: true, augmented: false }),
                Box::new(TcnStrategy { pretrained: false, augmented: true }),
                Box::new(TcnStrategy { pretrained: true, augmented: true }),
            ],
        }
    }

    pub fn get(&self, name: &str) -> Result<&dyn Strategy> {
        let lower = name.to_ascii_lowercase();
        self.strategies
            .iter()
            .find(|s| s.name() == lower)
            .map(|s| s.as_ref())
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown strategy {name:?}; available: {}",
                    self.names().join(", ")
                ))
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.strategies.iter().map(|s| s.name()).collect()
    }
}

// ---------------------------------------------------------------------------
// Bayesian strategy
// ---------------------------------------------------------------------------

struct BayesStrategy;

impl Strategy for BayesStrategy {
    fn name(&self) -> &'static str {
        "bayes"
    }

    fn snippet_mode(&self) -> SnippetMode {
        SnippetMode::WholeWindow
    }

    fn train(
        &self,
        snippets: &SnippetSet,
        ctx: &StrategyContext,
    ) -> Result<(Box<dyn TrainedTracker>, TrainLog)> {
        if snippets.train.is_empty() {
            return Err(Error::InvalidInput("no training snippets".into()));
        }
        let mut excerpts = Vec::with_capacity(snippets.train.len());
        for snippet in snippets.train.iter().chain(&snippets.val) {
            let spec = ctx.front_end.spectrogram(&snippet.audio)?;
            excerpts.push((ctx.front_end.flux_envelope(&spec)?, snippet.annotations.clone()));
        }
        let config = BayesTrainConfig {
            beats_per_bar: snippets.train[0].beats_per_bar,
            seed: ctx.seed,
            ..ctx.bayes.clone()
        };
        let model = bayes_train(&excerpts, &config)?;
        let base_fps = excerpts[0].0.frame_rate;
        let log = TrainLog {
            history: None,
            per_epoch_snippets: excerpts.len(),
            frame_rates: vec![base_fps],
        };
        let tracker = BayesTracker {
            front_end: ctx.front_end.clone(),
            model,
        };
        Ok((Box::new(tracker), log))
    }
}

/// Bar-pointer tracker: one joint decode supplies both tasks.
pub struct BayesTracker {
    pub front_end: FrontEndConfig,
    pub model: BarPointerModel,
}

impl TrainedTracker for BayesTracker {
    fn kind(&self) -> &'static str {
        "bayes"
    }

    fn track(&self, features: &TrackFeatures) -> Result<TrackOutput> {
        let decoded = bayes_track(&self.model, &features.flux)?;
        Ok(TrackOutput {
            beats: BeatList::from_times(&decoded.times())?,
            downbeats: decoded,
        })
    }

    fn save(&self, path: &Path) -> Result<()> {
        save_model_file(
            path,
            &ModelFile::Bayes {
                format_version: FORMAT_VERSION,
                front_end: self.front_end.clone(),
                model: self.model.clone(),
            },
        )
    }
}

// ---------------------------------------------------------------------------
// TCN strategies (fs / ft / fsa / fta)
// ---------------------------------------------------------------------------

struct TcnStrategy {
    pretrained: bool,
    augmented: bool,
}

impl TcnStrategy {
    /// Extract filterbank features for a snippet at one target frame rate.
    fn features_at(
        &self,
        snippet: &Snippet,
        ctx: &StrategyContext,
        target_fps: f64,
    ) -> Result<FeatureMatrix> {
        let hop = ctx
            .front_end
            .hop_for_rate(snippet.audio.sample_rate, target_fps);
        let spec = stft(&snippet.audio, ctx.front_end.window_size, hop)?;
        ctx.front_end.tcn_features(&spec)
    }
}

impl Strategy for TcnStrategy {
    fn name(&self) -> &'static str {
        match (self.pretrained, self.augmented) {
            (false, false) => "fs",
            (true, false) => "ft",
            (false, true) => "fsa",
            (true, true) => "fta",
        }
    }

    fn snippet_mode(&self) -> SnippetMode {
        SnippetMode::SplitHalves
    }

    fn train(
        &self,
        snippets: &SnippetSet,
        ctx: &StrategyContext,
    ) -> Result<(Box<dyn TrainedTracker>, TrainLog)> {
        if snippets.train.is_empty() || snippets.val.is_empty() {
            return Err(Error::InvalidInput(
                "TCN training needs train and validation snippets".into(),
            ));
        }
        let sample_rate = snippets.train[0].audio.sample_rate;
        let base_fps = ctx.front_end.base_frame_rate(sample_rate);
        let train_rates = if self.augmented {
            frame_rate_variants(base_fps)
        } else {
            vec![base_fps]
        };

        // Annotations stay in seconds; each variant re-grids its own targets
        // through the features' frame rate. Events past the last full
        // analysis window are clipped.
        let clip_to_horizon = |features: &FeatureMatrix, ann: &BeatList| -> BeatList {
            let horizon = features.n_frames() as f64 / features.frame_rate + features.frame_offset;
            ann.window(0.0, horizon)
        };
        let mut train_set = Vec::with_capacity(snippets.train.len() * train_rates.len());
        for rate in &train_rates {
            for snippet in &snippets.train {
                let features = self.features_at(snippet, ctx, *rate)?;
                let ann = clip_to_horizon(&features, &snippet.annotations);
                train_set.push((features, ann));
            }
        }
        let mut val_set = Vec::with_capacity(snippets.val.len());
        for snippet in &snippets.val {
            let features = self.features_at(snippet, ctx, base_fps)?;
            let ann = clip_to_horizon(&features, &snippet.annotations);
            val_set.push((features, ann));
        }

        let n_bands = train_set[0].0.n_bands;
        let config = TcnConfig {
            n_bands,
            seed: ctx.seed,
            ..ctx.tcn.clone()
        };

        let (weights, history) = if self.pretrained {
            let path = ctx.pretrained_path.as_ref().ok_or_else(|| {
                Error::Config(format!(
                    "strategy {:?} needs a pretrained checkpoint path",
                    self.name()
                ))
            })?;
            let pretrained = load_tcn_weights(path)?;
            if pretrained.config.n_bands != n_bands {
                return Err(Error::ShapeMismatch(format!(
                    "checkpoint expects {} bands, features have {n_bands}",
                    pretrained.config.n_bands
                )));
            }
            finetune(pretrained, &ctx.schedule_ft, &train_set, &val_set)?
        } else {
            train_from_scratch(&config, &ctx.schedule_fs, &train_set, &val_set)?
        };

        let beats_per_bar = snippets.train[0].beats_per_bar;
        let log = TrainLog {
            per_epoch_snippets: train_set.len(),
            frame_rates: train_rates,
            history: Some(history),
        };
        let tracker = TcnTracker {
            front_end: ctx.front_end.clone(),
            weights,
            decode: ctx.decode,
            tempo_range: ctx.tempo_range,
            meter_options: ctx.meter_options_for(beats_per_bar),
        };
        Ok((Box::new(tracker), log))
    }
}

/// TCN tracker: forward pass then the two separate DBN decoders.
pub struct TcnTracker {
    pub front_end: FrontEndConfig,
    pub weights: TcnWeights,
    pub decode: DbnConfig,
    pub tempo_range: TempoRange,
    pub meter_options: Vec<u32>,
}

impl TrainedTracker for TcnTracker {
    fn kind(&self) -> &'static str {
        "tcn"
    }

    fn track(&self, features: &TrackFeatures) -> Result<TrackOutput> {
        let acts = forward(&self.weights, &features.tcn, false)?;
        let beats = dbn_beat_decode(
            &acts.beat,
            acts.frame_rate,
            acts.frame_offset,
            &self.tempo_range,
            &self.decode,
        )?;
        let downbeats =
            dbn_downbeat_decode(&acts, &self.meter_options, &self.tempo_range, &self.decode)?;
        Ok(TrackOutput { beats, downbeats })
    }

    fn save(&self, path: &Path) -> Result<()> {
        save_model_file(
            path,
            &ModelFile::Tcn {
                format_version: FORMAT_VERSION,
                front_end: self.front_end.clone(),
                weights: self.weights.clone(),
                decode: self.decode,
                tempo_range: self.tempo_range,
                meter_options: self.meter_options.clone(),
            },
        )
    }
}

// ---------------------------------------------------------------------------
// Model files
// ---------------------------------------------------------------------------

const FORMAT_VERSION: u32 = 1;

/// On-disk model container: a versioned JSON document tagged by kind, with
/// the front-end recipe echoed so tracking can reproduce features.
#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ModelFile {
    Tcn {
        format_version: u32,
        front_end: FrontEndConfig,
        weights: TcnWeights,
        decode: DbnConfig,
        tempo_range: TempoRange,
        meter_options: Vec<u32>,
    },
    Bayes {
        format_version: u32,
        front_end: FrontEndConfig,
        model: BarPointerModel,
    },
}

fn save_model_file(path: &Path, file: &ModelFile) -> Result<()> {
    let display = path.display().to_string();
    let text = serde_json::to_string(file)
        .map_err(|e| Error::Other(format!("model serialization: {e}")))?;
    std::fs::write(path, text).map_err(|e| Error::io(&display, e))
}

fn load_model_file(path: &Path) -> Result<ModelFile> {
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(&display, e))?;
    let file: ModelFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: display.clone(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let version = match &file {
        ModelFile::Tcn { format_version, .. } | ModelFile::Bayes { format_version, .. } => {
            *format_version
        }
    };
    if version != FORMAT_VERSION {
        return Err(Error::Config(format!(
            "model file {display} has format version {version}, expected {FORMAT_VERSION}"
        )));
    }
    Ok(file)
}

/// Load any saved tracker together with its front-end recipe.
pub fn load_model(path: impl AsRef<Path>) -> Result<(FrontEndConfig, Box<dyn TrainedTracker>)> {
    match load_model_file(path.as_ref())? {
        ModelFile::Tcn {
            front_end,
            weights,
            decode,
            tempo_range,
            meter_options,
            ..
        } => Ok((
            front_end.clone(),
            Box::new(TcnTracker {
                front_end,
                weights,
                decode,
                tempo_range,
                meter_options,
            }),
        )),
        ModelFile::Bayes {
            front_end, model, ..
        } => Ok((
            front_end.clone(),
            Box::new(BayesTracker { front_end, model }),
        )),
    }
}

/// Load just the network weights from a TCN model file (for fine-tuning).
pub fn load_tcn_weights(path: impl AsRef<Path>) -> Result<TcnWeights> {
    match load_model_file(path.as_ref())? {
        ModelFile::Tcn { weights, .. } => Ok(weights),
        ModelFile::Bayes { .. } => Err(Error::Config(format!(
            "{} is a bayes model, not a TCN checkpoint",
            path.as_ref().display()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_knows_all_five_strategies() {
        let registry = StrategyRegistry::builtin();
        let mut names = registry.names();
        names.sort();
        assert_eq!(names, vec!["bayes", "fs", "fsa", "ft", "fta"]);
        assert!(registry.get("FS").is_ok()); // case-insensitive
        assert!(registry.get("nope").is_err());
    }

    #[test]
    fn snippet_modes_match_the_protocol() {
        let registry = StrategyRegistry::builtin();
        assert_eq!(
            registry.get("bayes").unwrap().snippet_mode(),
            SnippetMode::WholeWindow
        );
        for name in ["fs", "ft", "fsa", "fta"] {
            assert_eq!(
                registry.get(name).unwrap().snippet_mode(),
                SnippetMode::SplitHalves
            );
        }
    }

    #[test]
    fn hop_for_rate_hits_the_variant_grid() {
        let fe = FrontEndConfig::default();
        assert_eq!(fe.hop_for_rate(44100, 100.0), 441);
        assert_eq!(fe.hop_for_rate(44100, 105.0), 420);
        assert_eq!(fe.hop_for_rate(44100, 95.0), 464);
    }
}
