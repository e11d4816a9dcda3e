//! Strategy execution over the (strategy, subset, seed) grid: per-cell
//! training with wall-clock instrumentation, full-length test tracking,
//! metric evaluation, leakage auditing and result emission.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use crate::beats::BeatList;
use crate::error::{Error, Result};
use crate::harness::{
    excerpt_catalog, load_dataset, make_snippets, split_order, split_train_test, DatasetManifest,
    Excerpt, SubsetSize, SNIPPET_SECONDS,
};
use crate::metrics::{bootstrap_summary, MetricParams, MetricReport};
use crate::strategy::{StrategyContext, StrategyRegistry, TrackFeatures};

/// The experiment grid.
#[derive(Debug, Clone)]
pub struct MatrixSpec {
    pub strategies: Vec<String>,
    pub subsets: Vec<SubsetSize>,
    pub seeds: Vec<u64>,
    pub workers: usize,
}

impl MatrixSpec {
    pub fn cell_count(&self) -> usize {
        self.strategies.len() * self.subsets.len() * self.seeds.len()
    }
}

/// Per-track evaluation of one cell.
#[derive(Debug, Clone)]
pub struct TrackEval {
    pub track_id: String,
    pub beat: MetricReport,
    pub downbeat: MetricReport,
}

/// Outcome of one (strategy, subset, seed) cell.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub strategy: String,
    pub subset: SubsetSize,
    pub seed: u64,
    pub train_wall_seconds: f64,
    pub infer_wall_seconds: f64,
    pub per_track: Vec<TrackEval>,
    /// Snippets visited per epoch (augmentation shows up as a multiple).
    pub per_epoch_snippets: usize,
    /// Frame rates the training features used.
    pub frame_rates: Vec<f64>,
    /// Source excerpt ids of every training/validation snippet.
    pub train_track_ids: Vec<String>,
    pub test_track_ids: Vec<String>,
}

/// A cell either produced a record or an error; the matrix keeps going.
#[derive(Debug, Clone)]
pub enum CellResult {
    Done(Box<RunRecord>),
    Failed {
        strategy: String,
        subset: SubsetSize,
        seed: u64,
        error: String,
    },
}

/// Train/test assignment of one planned cell (no audio loaded).
#[derive(Debug, Clone)]
pub struct CellPlan {
    pub strategy: String,
    pub subset: SubsetSize,
    pub seed: u64,
    pub train_track_ids: Vec<String>,
    pub test_track_ids: Vec<String>,
}

/// Resolve every cell's train/test track assignment from headers and
/// annotation files only.
pub fn plan_matrix(spec: &MatrixSpec, manifest: &DatasetManifest) -> Result<Vec<CellPlan>> {
    let mut plans = Vec::with_capacity(spec.cell_count());
    for &seed in &spec.seeds {
        let catalog = excerpt_catalog(manifest, seed)?;
        let (train_idx, test_idx) = split_order(catalog.len(), seed)?;
        let test_ids: Vec<String> = test_idx.iter().map(|&i| catalog[i].id.clone()).collect();
        for subset in &spec.subsets {
            let train_ids: Vec<String> = match subset {
                SubsetSize::Tracks(n) => {
                    if *n > train_idx.len() {
                        return Err(Error::InvalidInput(format!(
                            "subset of {n} tracks exceeds the {} training excerpts",
                            train_idx.len()
                        )));
                    }
                    train_idx[..*n].iter().map(|&i| catalog[i].id.clone()).collect()
                }
                SubsetSize::All => train_idx.iter().map(|&i| catalog[i].id.clone()).collect(),
            };
            for strategy in &spec.strategies {
                plans.push(CellPlan {
                    strategy: strategy.clone(),
                    subset: *subset,
                    seed,
                    train_track_ids: train_ids.clone(),
                    test_track_ids: test_ids.clone(),
                });
            }
        }
    }
    Ok(plans)
}

/// Protocol integrity check: no track id may appear on both sides of any
/// cell, and per (strategy, seed) the subset ladder must be nested.
pub fn audit_plan(plans: &[CellPlan]) -> Result<()> {
    for plan in plans {
        for id in &plan.train_track_ids {
            if plan.test_track_ids.contains(id) {
                return Err(Error::InvalidInput(format!(
                    "leakage: track {id:?} is in both train and test of \
                     ({}, {:?}, seed {})",
                    plan.strategy, plan.subset, plan.seed
                )));
            }
        }
    }
    // nesting: smaller subsets are prefixes of larger ones
    for a in plans {
        for b in plans {
            if a.strategy == b.strategy
                && a.seed == b.seed
                && a.train_track_ids.len() < b.train_track_ids.len()
                && b.train_track_ids[..a.train_track_ids.len()] != a.train_track_ids[..]
            {
                return Err(Error::InvalidInput(format!(
                    "subset ladder not nested for ({}, seed {})",
                    a.strategy, a.seed
                )));
            }
        }
    }
    Ok(())
}

/// One test track prepared for repeated tracking.
struct PreparedTest {
    id: String,
    annotations: BeatList,
    features: TrackFeatures,
}

fn prepare_tests(test: &[Excerpt], ctx: &StrategyContext) -> Result<Vec<PreparedTest>> {
    test.iter()
        .map(|e| {
            Ok(PreparedTest {
                id: e.id.clone(),
                annotations: e.annotations.clone(),
                features: TrackFeatures::from_audio(&e.audio, &ctx.front_end)?,
            })
        })
        .collect()
}

fn run_cell(
    registry: &StrategyRegistry,
    strategy_name: &str,
    subset: SubsetSize,
    seed: u64,
    train_excerpts: &[Excerpt],
    tests: &[PreparedTest],
    base_ctx: &StrategyContext,
    metrics: &MetricParams,
) -> Result<RunRecord> {
    let strategy = registry.get(strategy_name)?;
    let ctx = StrategyContext {
        seed,
        ..base_ctx.clone()
    };
    let snippets = make_snippets(train_excerpts, subset, strategy.snippet_mode())?;
    let train_track_ids: Vec<String> = snippets
        .train
        .iter()
        .chain(&snippets.val)
        .map(|s| s.source_track_id.clone())
        .collect();

    let train_start = Instant::now();
    let (tracker, log) = strategy.train(&snippets, &ctx)?;
    let train_wall_seconds = train_start.elapsed().as_secs_f64().max(1e-9);

    let infer_start = Instant::now();
    let mut per_track = Vec::with_capacity(tests.len());
    for test in tests {
        let output = tracker.track(&test.features)?;
        let beat = MetricReport::evaluate(&output.beats, &test.annotations, metrics);
        let downbeat = MetricReport::evaluate(
            &output.downbeats.downbeats(),
            &test.annotations.downbeats(),
            metrics,
        );
        per_track.push(TrackEval {
            track_id: test.id.clone(),
            beat,
            downbeat,
        });
    }
    let infer_wall_seconds = infer_start.elapsed().as_secs_f64().max(1e-9);

    Ok(RunRecord {
        strategy: strategy.name().to_string(),
        subset,
        seed,
        train_wall_seconds,
        infer_wall_seconds,
        per_track,
        per_epoch_snippets: log.per_epoch_snippets,
        frame_rates: log.frame_rates,
        train_track_ids,
        test_track_ids: tests.iter().map(|t| t.id.clone()).collect(),
    })
}

/// Run one (strategy, subset, seed) cell from a manifest.
pub fn run_strategy(
    strategy_name: &str,
    subset: SubsetSize,
    seed: u64,
    manifest: &DatasetManifest,
    base_ctx: &StrategyContext,
    metrics: &MetricParams,
) -> Result<RunRecord> {
    let registry = StrategyRegistry::builtin();
    let excerpts = load_dataset(manifest, seed)?;
    let (train, test) = split_train_test(excerpts, seed)?;
    let ctx = StrategyContext {
        seed,
        ..base_ctx.clone()
    };
    let tests = prepare_tests(&test, &ctx)?;
    run_cell(
        &registry,
        strategy_name,
        subset,
        seed,
        &train,
        &tests,
        base_ctx,
        metrics,
    )
}

/// Everything a matrix run produces.
#[derive(Debug)]
pub struct MatrixOutput {
    pub cells: Vec<CellResult>,
    pub results_csv: PathBuf,
    pub summary_csv: PathBuf,
    pub plot_perf_csv: PathBuf,
    pub plot_time_csv: PathBuf,
}

impl MatrixOutput {
    pub fn records(&self) -> impl Iterator<Item = &RunRecord> {
        self.cells.iter().filter_map(|c| match c {
            CellResult::Done(r) => Some(r.as_ref()),
            CellResult::Failed { .. } => None,
        })
    }
}

/// Run the full grid. Seeds are processed sequentially (their data is
/// shared); the (strategy, subset) cells of one seed run on a bounded worker
/// pool, each cell pinned to a single worker so its timings are not skewed
/// by internal parallelism. Cell failures are recorded and the matrix
/// continues.
pub fn run_matrix(
    spec: &MatrixSpec,
    manifest: &DatasetManifest,
    base_ctx: &StrategyContext,
    metrics: &MetricParams,
    out_dir: impl AsRef<Path>,
) -> Result<MatrixOutput> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    let registry = StrategyRegistry::builtin();
    for name in &spec.strategies {
        registry.get(name)?;
    }
    let workers = spec.workers.max(1);
    let keep_full_audio = spec.subsets.contains(&SubsetSize::All);

    let mut cells: Vec<CellResult> = Vec::with_capacity(spec.cell_count());
    for &seed in &spec.seeds {
        let excerpts = load_dataset(manifest, seed)?;
        let (mut train, test) = split_train_test(excerpts, seed)?;
        if !keep_full_audio {
            for excerpt in &mut train {
                excerpt.audio = excerpt.audio.slice_seconds(0.0, SNIPPET_SECONDS);
            }
        }
        let ctx = StrategyContext {
            seed,
            ..base_ctx.clone()
        };
        let tests = Arc::new(prepare_tests(&test, &ctx)?);
        drop(test);
        let train = Arc::new(train);

        let jobs: Vec<(String, SubsetSize)> = spec
            .subsets
            .iter()
            .flat_map(|&subset| {
                spec.strategies
                    .iter()
                    .map(move |s| (s.clone(), subset))
            })
            .collect();
        let next_job = AtomicUsize::new(0);
        let results: Mutex<Vec<Option<CellResult>>> = Mutex::new(vec![None; jobs.len()]);
        std::thread::scope(|scope| {
            for _ in 0..workers.min(jobs.len()) {
                scope.spawn(|| loop {
                    let idx = next_job.fetch_add(1, Ordering::SeqCst);
                    if idx >= jobs.len() {
                        break;
                    }
                    let (strategy, subset) = &jobs[idx];
                    let outcome = match run_cell(
                        &registry,
                        strategy,
                        *subset,
                        seed,
                        &train,
                        &tests,
                        base_ctx,
                        metrics,
                    ) {
                        Ok(record) => CellResult::Done(Box::new(record)),
                        Err(e) => CellResult::Failed {
                            strategy: strategy.clone(),
                            subset: *subset,
                            seed,
                            error: e.to_string(),
                        },
                    };
                    results.lock().unwrap()[idx] = Some(outcome);
                });
            }
        });
        cells.extend(
            results
                .into_inner()
                .unwrap()
                .into_iter()
                .map(|c| c.expect("every job slot filled")),
        );
    }

    // deterministic emission order: strategy, subset, seed as given in spec
    let order_key = |strategy: &str, subset: &SubsetSize, seed: u64| {
        let si = spec.strategies.iter().position(|s| s == strategy).unwrap_or(usize::MAX);
        let bi = spec.subsets.iter().position(|s| s == subset).unwrap_or(usize::MAX);
        let ki = spec.seeds.iter().position(|&s| s == seed).unwrap_or(usize::MAX);
        (si, bi, ki)
    };
    cells.sort_by_key(|c| match c {
        CellResult::Done(r) => order_key(&r.strategy, &r.subset, r.seed),
        CellResult::Failed {
            strategy,
            subset,
            seed,
            ..
        } => order_key(strategy, subset, *seed),
    });

    let output = MatrixOutput {
        results_csv: out_dir.join("results.csv"),
        summary_csv: out_dir.join("summary.csv"),
        plot_perf_csv: out_dir.join("plotdata_perf.csv"),
        plot_time_csv: out_dir.join("plotdata_time.csv"),
        cells,
    };
    write_results_csv(&output)?;
    write_summary_csv(&output, spec)?;
    write_plot_perf_csv(&output, spec)?;
    write_plot_time_csv(&output)?;
    write_run_info(&output, spec, manifest, workers, out_dir)?;
    Ok(output)
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    Ok(std::io::BufWriter::new(
        std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?,
    ))
}

fn wr(path: &Path, r: std::io::Result<()>) -> Result<()> {
    r.map_err(|e| Error::io(path.display().to_string(), e))
}

fn write_results_csv(output: &MatrixOutput) -> Result<()> {
    let path = &output.results_csv;
    let mut out = create(path)?;
    wr(
        path,
        writeln!(
            out,
            "strategy,subset_minutes,seed,track_id,task,f,cmlt,amlt,train_seconds"
        ),
    )?;
    for record in output.records() {
        let label = record.subset.minutes_label();
        for eval in &record.per_track {
            for (task, report) in [("beat", &eval.beat), ("downbeat", &eval.downbeat)] {
                wr(
                    path,
                    writeln!(
                        out,
                        "{},{},{},{},{},{:.4},{:.4},{:.4},{:.4}",
                        record.strategy.to_uppercase(),
                        label,
                        record.seed,
                        eval.track_id,
                        task,
                        report.f_measure,
                        report.cmlt,
                        report.amlt,
                        record.train_wall_seconds
                    ),
                )?;
            }
        }
    }
    Ok(())
}

/// Pool one metric over every track of every seed in a (strategy, subset)
/// group.
fn pooled(
    output: &MatrixOutput,
    strategy: &str,
    subset: &SubsetSize,
    pick: impl Fn(&TrackEval) -> f64,
) -> Vec<f64> {
    output
        .records()
        .filter(|r| r.strategy == strategy && r.subset == *subset)
        .flat_map(|r| r.per_track.iter().map(&pick))
        .collect()
}

/// Table-layout summary: one row per model (strategy x subset), mean scores
/// as percentages for both tasks.
fn write_summary_csv(output: &MatrixOutput, spec: &MatrixSpec) -> Result<()> {
    let path = &output.summary_csv;
    let mut out = create(path)?;
    wr(
        path,
        writeln!(
            out,
            "model,beat_cmlt,beat_amlt,beat_f,downbeat_cmlt,downbeat_amlt,downbeat_f"
        ),
    )?;
    for strategy in &spec.strategies {
        for subset in &spec.subsets {
            let mean = |pick: &dyn Fn(&TrackEval) -> f64| -> Option<f64> {
                let scores = pooled(output, strategy, subset, pick);
                (!scores.is_empty())
                    .then(|| 100.0 * scores.iter().sum::<f64>() / scores.len() as f64)
            };
            let cols: Vec<Option<f64>> = vec![
                mean(&|e| e.beat.cmlt),
                mean(&|e| e.beat.amlt),
                mean(&|e| e.beat.f_measure),
                mean(&|e| e.downbeat.cmlt),
                mean(&|e| e.downbeat.amlt),
                mean(&|e| e.downbeat.f_measure),
            ];
            let row = cols
                .iter()
                .map(|v| v.map_or("".to_string(), |x| format!("{x:.1}")))
                .collect::<Vec<_>>()
                .join(",");
            wr(
                path,
                writeln!(
                    out,
                    "{}_{},{row}",
                    strategy.to_uppercase(),
                    subset.minutes_label()
                ),
            )?;
        }
    }
    Ok(())
}

fn fnv(s: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Long-format performance data with bootstrap confidence intervals
/// (per strategy, subset, task, metric).
fn write_plot_perf_csv(output: &MatrixOutput, spec: &MatrixSpec) -> Result<()> {
    let path = &output.plot_perf_csv;
    let mut out = create(path)?;
    wr(
        path,
        writeln!(out, "strategy,subset_minutes,task,metric,mean,ci_low,ci_high,n"),
    )?;
    for strategy in &spec.strategies {
        for subset in &spec.subsets {
            for (task, metric, pick) in [
                ("beat", "f", (|e: &TrackEval| e.beat.f_measure) as fn(&TrackEval) -> f64),
                ("beat", "cmlt", |e| e.beat.cmlt),
                ("beat", "amlt", |e| e.beat.amlt),
                ("downbeat", "f", |e| e.downbeat.f_measure),
                ("downbeat", "cmlt", |e| e.downbeat.cmlt),
                ("downbeat", "amlt", |e| e.downbeat.amlt),
            ] {
                let scores = pooled(output, strategy, subset, pick);
                if scores.is_empty() {
                    continue;
                }
                let label = subset.minutes_label();
                let seed = fnv(&format!("{strategy}|{label}|{task}|{metric}"));
                let summary = bootstrap_summary(&scores, 1000, 0.95, seed)?;
                wr(
                    path,
                    writeln!(
                        out,
                        "{},{},{},{},{:.4},{:.4},{:.4},{}",
                        strategy.to_uppercase(),
                        label,
                        task,
                        metric,
                        summary.mean,
                        summary.ci_low,
                        summary.ci_high,
                        summary.n
                    ),
                )?;
            }
        }
    }
    Ok(())
}

fn write_plot_time_csv(output: &MatrixOutput) -> Result<()> {
    let path = &output.plot_time_csv;
    let mut out = create(path)?;
    wr(
        path,
        writeln!(out, "strategy,subset_minutes,seed,train_seconds,infer_seconds"),
    )?;
    for record in output.records() {
        wr(
            path,
            writeln!(
                out,
                "{},{},{},{:.4},{:.4}",
                record.strategy.to_uppercase(),
                record.subset.minutes_label(),
                record.seed,
                record.train_wall_seconds,
                record.infer_wall_seconds
            ),
        )?;
    }
    Ok(())
}

fn write_run_info(
    output: &MatrixOutput,
    spec: &MatrixSpec,
    manifest: &DatasetManifest,
    workers: usize,
    out_dir: &Path,
) -> Result<()> {
    let failed: Vec<String> = output
        .cells
        .iter()
        .filter_map(|c| match c {
            CellResult::Failed {
                strategy,
                subset,
                seed,
                error,
            } => Some(format!(
                "{strategy} {} seed {seed}: {error}",
                subset.minutes_label()
            )),
            CellResult::Done(_) => None,
        })
        .collect();
    let info = serde_json::json!({
        "dataset": manifest.dataset_name,
        "strategies": spec.strategies,
        "subsets": spec.subsets.iter().map(|s| s.minutes_label()).collect::<Vec<_>>(),
        "seeds": spec.seeds,
        "workers": workers,
        "cells_total": spec.cell_count(),
        "cells_failed": failed.len(),
        "failures": failed,
    });
    let path = out_dir.join("run_info.json");
    std::fs::write(&path, serde_json::to_string_pretty(&info).unwrap())
        .map_err(|e| Error::io(path.display().to_string(), e))
}
