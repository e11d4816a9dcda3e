//! takt: command-line entry point for the meter tracking toolkit.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use takt_core::beats::BeatList;
use takt_core::config::CliConfig;
use takt_core::harness::{
    audit_plan, plan_matrix, run_matrix, DatasetManifest, MatrixSpec, SubsetSize,
};
use takt_core::metrics::MetricReport;
use takt_core::profile::{compute_profile, profile_stats, write_raw_csv, write_stats_csv};
use takt_core::strategy::{load_model, StrategyRegistry, TrackFeatures};
use takt_core::synth::{make_suite, SuiteKind};

#[derive(Parser)]
#[command(
    name = "takt",
    about = "Meter tracking toolkit: adaptable beat/downbeat trackers",
    version
)]
struct Cli {
    /// Configuration file (TOML); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed fallback order: --seed, then MT_SEED, then 0.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic percussion suite (93 excerpts of 30 s).
    Synth {
        /// candombe_like, samba_like or ballroom_like
        #[arg(long)]
        suite: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one tracker and write its model file.
    Train {
        /// tcn or bayes
        #[arg(long)]
        model: String,
        /// fs, ft, fsa or fta (ignored for --model bayes)
        #[arg(long)]
        strategy: Option<String>,
        #[arg(long)]
        manifest: PathBuf,
        /// Track count or "all"
        #[arg(long)]
        subset: String,
        #[arg(long)]
        out: PathBuf,
        /// TCN checkpoint for the ft/fta strategies (overrides the config).
        #[arg(long)]
        pretrained: Option<PathBuf>,
        /// Also write the training history CSV here.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Track one audio file with a saved model.
    Track {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        audio: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score an estimate against an annotation file.
    Evaluate {
        #[arg(long)]
        est: PathBuf,
        #[arg(long)]
        ann: PathBuf,
        /// beat (default) or downbeat
        #[arg(long, default_value = "beat")]
        task: String,
    },
    /// Run the full strategy/subset/seed experiment grid.
    Experiment {
        #[arg(long)]
        manifest: PathBuf,
        /// Comma-separated strategy names (default: all five).
        #[arg(long)]
        strategies: Option<String>,
        /// Comma-separated subsets: track counts and/or "all"
        /// (default: 4,9,18,37,55,74).
        #[arg(long)]
        subsets: Option<String>,
        /// Number of repetition seeds (0, 1, .., n-1).
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// TCN checkpoint for ft/fta.
        #[arg(long)]
        pretrained: Option<PathBuf>,
    },
    /// Compute the tatum strength profile of a dataset.
    Profile {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write every pooled sample to profile_raw.csv.
        #[arg(long, default_value_t = false)]
        raw: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn resolve_seed(cli_seed: Option<u64>) -> Result<u64, takt_core::Error> {
    if let Some(s) = cli_seed {
        return Ok(s);
    }
    match std::env::var("MT_SEED") {
        Ok(v) => v
            .parse()
            .map_err(|_| takt_core::Error::Config(format!("MT_SEED is not an integer: {v:?}"))),
        Err(_) => Ok(0),
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<CliConfig, takt_core::Error> {
    match path {
        Some(p) => CliConfig::load(p),
        None => Ok(CliConfig::default()),
    }
}

fn run(cli: Cli) -> Result<(), takt_core::Error> {
    let config = load_config(&cli.config)?;
    let seed = resolve_seed(cli.seed)?;
    match cli.command {
        Command::Synth { suite, out } => {
            let kind = SuiteKind::parse(&suite)?;
            let manifest = make_suite(kind, &out, seed)?;
            println!(
                "wrote {} excerpts and {}",
                manifest.entries.len(),
                out.join("manifest.json").display()
            );
            Ok(())
        }
        Command::Train {
            model,
            strategy,
            manifest,
            subset,
            out,
            pretrained,
            history,
        } => {
            let strategy_name = match model.as_str() {
                "bayes" => "bayes".to_string(),
                "tcn" => strategy.clone().ok_or_else(|| {
                    takt_core::Error::Config("--model tcn needs --strategy fs|ft|fsa|fta".into())
                })?,
                other => {
                    return Err(takt_core::Error::Config(format!(
                        "unknown model {other:?}; expected tcn or bayes"
                    )))
                }
            };
            let manifest = DatasetManifest::load(&manifest)?;
            let subset = SubsetSize::parse(&subset)?;
            let mut ctx = config.strategy_context(seed)?;
            if pretrained.is_some() {
                ctx.pretrained_path = pretrained;
            }

            let registry = StrategyRegistry::builtin();
            let strategy = registry.get(&strategy_name)?;
            let excerpts = takt_core::harness::load_dataset(&manifest, seed)?;
            let (train, _) = takt_core::harness::split_train_test(excerpts, seed)?;
            let snippets =
                takt_core::harness::make_snippets(&train, subset, strategy.snippet_mode())?;
            let (tracker, log) = strategy.train(&snippets, &ctx)?;
            tracker.save(&out)?;
            if let (Some(path), Some(h)) = (history, log.history.as_ref()) {
                h.write_csv(path)?;
            }
            println!(
                "trained {} on {} snippets -> {}",
                strategy_name,
                log.per_epoch_snippets,
                out.display()
            );
            Ok(())
        }
        Command::Track { model, audio, out } => {
            let (front_end, tracker) = load_model(&model)?;
            let buffer = takt_core::audio::read_wav(&audio)?;
            let features = TrackFeatures::from_audio(&buffer, &front_end)?;
            let output = tracker.track(&features)?;
            output.downbeats.write(&out)?;
            println!("wrote {} beats to {}", output.downbeats.len(), out.display());
            Ok(())
        }
        Command::Evaluate { est, ann, task } => {
            let est = BeatList::read(&est)?;
            let ann = BeatList::read(&ann)?;
            let params = config.metric_params();
            let report = match task.as_str() {
                "beat" => MetricReport::evaluate(&est, &ann, &params),
                "downbeat" => MetricReport::evaluate(&est.downbeats(), &ann.downbeats(), &params),
                other => {
                    return Err(takt_core::Error::Config(format!(
                        "unknown task {other:?}; expected beat or downbeat"
                    )))
                }
            };
            println!(
                "f={:.3} cmlt={:.3} amlt={:.3}",
                report.f_measure, report.cmlt, report.amlt
            );
            Ok(())
        }
        Command::Experiment {
            manifest,
            strategies,
            subsets,
            seeds,
            out,
            workers,
            pretrained,
        } => {
            let manifest = DatasetManifest::load(&manifest)?;
            let strategies: Vec<String> = match strategies {
                Some(s) => s.split(',').map(|x| x.trim().to_lowercase()).collect(),
                None => StrategyRegistry::builtin()
                    .names()
                    .iter()
                    .map(|s| s.to_string())
                    .collect(),
            };
            let subsets: Vec<SubsetSize> = match subsets {
                Some(s) => s
                    .split(',')
                    .map(|x| SubsetSize::parse(x.trim()))
                    .collect::<Result<_, _>>()?,
                None => takt_core::harness::SUBSET_LADDER
                    .iter()
                    .map(|&n| SubsetSize::Tracks(n))
                    .collect(),
            };
            let spec = MatrixSpec {
                strategies,
                subsets,
                seeds: (0..seeds as u64).collect(),
                workers,
            };
            let mut ctx = config.strategy_context(seed)?;
            if pretrained.is_some() {
                ctx.pretrained_path = pretrained;
            }
            // audit the planned assignments before any training happens
            let plans = plan_matrix(&spec, &manifest)?;
            audit_plan(&plans)?;
            let output = run_matrix(&spec, &manifest, &ctx, &config.metric_params(), &out)?;
            let failed = output.cells.len() - output.records().count();
            println!(
                "{} cells done, {} failed -> {}",
                output.records().count(),
                failed,
                output.results_csv.display()
            );
            Ok(())
        }
        Command::Profile { manifest, out, raw } => {
            let manifest = DatasetManifest::load(&manifest)?;
            std::fs::create_dir_all(&out)
                .map_err(|e| takt_core::Error::io(out.display().to_string(), e))?;
            let excerpts = takt_core::harness::load_dataset(&manifest, seed)?;
            let front_end = config.front_end();
            let profile_bands = [(20.0, 200.0), (200.0, f64::MAX)];
            let mut prepared = Vec::new();
            for excerpt in &excerpts {
                let spec = front_end.spectrogram(&excerpt.audio)?;
                let env = takt_core::audio::spectral_flux(&spec, &profile_bands, true)?;
                let env = takt_core::audio::normalize_local(&env, 1.0)?;
                prepared.push((env, excerpt.annotations.clone()));
            }
            let profile = compute_profile(&prepared, manifest.meter)?;
            if profile.skipped_excerpts > 0 {
                eprintln!(
                    "warning: {} excerpts had no complete bar and were skipped",
                    profile.skipped_excerpts
                );
            }
            let stats = profile_stats(&profile)?;
            write_stats_csv(&stats, out.join("profile.csv"))?;
            if raw {
                write_raw_csv(&profile, out.join("profile_raw.csv"))?;
            }
            println!("wrote {}", out.join("profile.csv").display());
            Ok(())
        }
    }
}
