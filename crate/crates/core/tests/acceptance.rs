//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (run with `cargo test --test acceptance -- --nocapture`
//! to see them).
//!
//! The synthetic suites and the shared experiment run are built once and
//! reused across criteria.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use once_cell::sync::Lazy;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use takt_core::audio::{frame_rate_variants, normalize_local, spectral_flux, FeatureMatrix};
use takt_core::beats::BeatList;
use takt_core::config::CliConfig;
use takt_core::decode::TempoRange;
use takt_core::harness::{
    audit_plan, load_dataset, make_snippets, plan_matrix, run_matrix, run_strategy,
    split_train_test, DatasetManifest, MatrixOutput, MatrixSpec, SubsetSize, SUBSET_LADDER,
};
use takt_core::hmm::{exhaustive, viterbi, Transitions};
use takt_core::metrics::{continuity, f_measure, MetricParams};
use takt_core::profile::{compute_profile, profile_stats};
use takt_core::strategy::{StrategyContext, StrategyRegistry};
use takt_core::synth::{make_suite, SuiteKind};
use takt_core::tcn::{
    forward, gradients, init_weights, loss, targets_from_annotations, TcnConfig, TcnGradients,
    TcnWeights, TargetSet,
};

struct Suites {
    _dir: tempfile::TempDir,
    samba: DatasetManifest,
    ballroom: DatasetManifest,
    work: PathBuf,
}

static SUITES: Lazy<Suites> = Lazy::new(|| {
    let dir = tempfile::tempdir().expect("tempdir");
    let samba = make_suite(SuiteKind::SambaLike, dir.path().join("samba"), 0xACCE).unwrap();
    let ballroom = make_suite(SuiteKind::BallroomLike, dir.path().join("ballroom"), 0xACCE).unwrap();
    let work = dir.path().join("work");
    std::fs::create_dir_all(&work).unwrap();
    Suites {
        samba,
        ballroom,
        work,
        _dir: dir,
    }
});

fn samba_context(seed: u64) -> StrategyContext {
    let mut ctx = StrategyContext::new(seed);
    ctx.tempo_range = TempoRange::SAMBA;
    ctx
}

struct SharedRun {
    output: MatrixOutput,
    wall: Duration,
}

/// The criterion-4 run: published protocol on the samba-like suite, three
/// seeds, bayes and fs, default model configuration.
static ADAPTATION_RUN: Lazy<SharedRun> = Lazy::new(|| {
    let suites = &*SUITES;
    let spec = MatrixSpec {
        strategies: vec!["bayes".into(), "fs".into()],
        subsets: SUBSET_LADDER.iter().map(|&n| SubsetSize::Tracks(n)).collect(),
        seeds: vec![0, 1, 2],
        workers: 4,
    };
    let ctx = samba_context(0);
    let start = Instant::now();
    let output = run_matrix(
        &spec,
        &suites.samba,
        &ctx,
        &MetricParams::default(),
        suites.work.join("adaptation"),
    )
    .expect("adaptation matrix");
    SharedRun {
        output,
        wall: start.elapsed(),
    }
});

/// Seed-mean of the per-seed track-mean beat F for one (strategy, subset).
fn seed_mean_beat_f(run: &MatrixOutput, strategy: &str, subset: SubsetSize) -> f64 {
    let per_seed: Vec<f64> = run
        .records()
        .filter(|r| r.strategy == strategy && r.subset == subset)
        .map(|r| {
            r.per_track.iter().map(|t| t.beat.f_measure).sum::<f64>() / r.per_track.len() as f64
        })
        .collect();
    assert!(!per_seed.is_empty(), "no records for {strategy} {subset:?}");
    per_seed.iter().sum::<f64>() / per_seed.len() as f64
}

fn mean_train_seconds(run: &MatrixOutput, strategy: &str, subset: SubsetSize) -> f64 {
    let times: Vec<f64> = run
        .records()
        .filter(|r| r.strategy == strategy && r.subset == subset)
        .map(|r| r.train_wall_seconds)
        .collect();
    times.iter().sum::<f64>() / times.len() as f64
}

// ---------------------------------------------------------------------------
// criterion 1
// ---------------------------------------------------------------------------

#[test]
fn criterion_01_viterbi_matches_exhaustive_enumeration() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
    for case in 0..100 {
        let n_states = rng.gen_range(1..=5);
        let n_frames = rng.gen_range(1..=8);
        let trans: Vec<Vec<f64>> = (0..n_states)
            .map(|_| {
                let raw: Vec<f64> = (0..n_states).map(|_| rng.gen_range(0.01..1.0)).collect();
                let sum: f64 = raw.iter().sum();
                raw.into_iter().map(|p| p / sum).collect()
            })
            .collect();
        let raw: Vec<f64> = (0..n_states).map(|_| rng.gen_range(0.01..1.0)).collect();
        let sum: f64 = raw.iter().sum();
        let initial_log: Vec<f64> = raw.into_iter().map(|p| (p / sum).ln()).collect();
        let obs: Vec<Vec<f64>> = (0..n_frames)
            .map(|_| (0..n_states).map(|_| rng.gen_range(0.01f64..1.0).ln()).collect())
            .collect();

        let mut edges = Vec::new();
        for (from, row) in trans.iter().enumerate() {
            for (to, &p) in row.iter().enumerate() {
                edges.push((from, to, p));
            }
        }
        let structure = Transitions::from_edges(n_states, &edges).unwrap();
        let got = viterbi(&structure, &initial_log, n_frames, |t, out| {
            out.copy_from_slice(&obs[t]);
        })
        .unwrap();
        let trans_log: Vec<Vec<f64>> = trans
            .iter()
            .map(|row| row.iter().map(|p| p.ln()).collect())
            .collect();
        let (want_path, want_score) =
            exhaustive::best_path(n_states, &initial_log, &trans_log, &obs);
        assert_eq!(got.log_prob, want_score, "case {case}: log-prob differs");
        assert_eq!(got.states, want_path, "case {case}: path differs");
    }
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    println!(
        "criterion 1 (viterbi oracle equivalence, 100 instances in {:.2}s): PASS",
        elapsed.as_secs_f64()
    );
}

// ---------------------------------------------------------------------------
// criterion 2
// ---------------------------------------------------------------------------

fn flatten(grads: &TcnGradients) -> Vec<f64> {
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

/// Central differences over every parameter, mirroring the flatten order.
fn numeric_gradients(
    weights: &TcnWeights,
    features: &FeatureMatrix,
    targets: &TargetSet,
    eps: f64,
) -> Vec<f64> {
    let eval = |w: &TcnWeights| loss(&forward(w, features, false).unwrap(), targets).unwrap();
    let mut out = Vec::new();
    let mut probe = weights.clone();
    for li in 0..weights.layers.len() {
        for wi in 0..weights.layers[li].w.len() {
            let orig = probe.layers[li].w[wi];
            probe.layers[li].w[wi] = orig + eps;
            let hi = eval(&probe);
            probe.layers[li].w[wi] = orig - eps;
            let lo = eval(&probe);
            probe.layers[li].w[wi] = orig;
            out.push((hi - lo) / (2.0 * eps));
        }
        for bi in 0..weights.layers[li].b.len() {
            let orig = probe.layers[li].b[bi];
            probe.layers[li].b[bi] = orig + eps;
            let hi = eval(&probe);
            probe.layers[li].b[bi] = orig - eps;
            let lo = eval(&probe);
            probe.layers[li].b[bi] = orig;
            out.push((hi - lo) / (2.0 * eps));
        }
    }
    for head_idx in 0..2 {
        for wi in 0..weights.beat_head.w.len() + 1 {
            let read = |p: &TcnWeights| -> f64 {
                let head = if head_idx == 0 { &p.beat_head } else { &p.downbeat_head };
                if wi < head.w.len() {
                    head.w[wi]
                } else {
                    head.b
                }
            };
            let write = |p: &mut TcnWeights, v: f64| {
                let head = if head_idx == 0 {
                    &mut p.beat_head
                } else {
                    &mut p.downbeat_head
                };
                if wi < head.w.len() {
                    head.w[wi] = v;
                } else {
                    head.b = v;
                }
            };
            let orig = read(&probe);
            write(&mut probe, orig + eps);
            let hi = eval(&probe);
            write(&mut probe, orig - eps);
            let lo = eval(&probe);
            write(&mut probe, orig);
            out.push((hi - lo) / (2.0 * eps));
        }
    }
    out
}

#[test]
fn criterion_02_gradients_match_central_differences() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC2);
    let mut worst = 0f64;
    for case in 0..10 {
        let n_layers = rng.gen_range(1..=3);
        let config = TcnConfig {
            n_bands: rng.gen_range(1..=4),
            n_layers,
            base_channels: rng.gen_range(2..=6),
            kernel_size: [1, 3, 5][rng.gen_range(0..3)],
            dilations: (0..n_layers).map(|i| 1 << i).collect(),
            dropout_rate: 0.0,
            seed: rng.gen(),
        };
        let weights = init_weights(&config).unwrap();
        let n_frames = rng.gen_range(20..45);
        let features = FeatureMatrix {
            data: (0..n_frames * config.n_bands)
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect(),
            n_bands: config.n_bands,
            frame_rate: 100.0,
            frame_offset: 0.0,
        };
        let ann_times: Vec<f64> = (1..4).map(|k| k as f64 * 0.09).collect();
        let ann = BeatList::from_times(&ann_times).unwrap();
        let targets = targets_from_annotations(&ann, 100.0, 0.0, n_frames).unwrap();
        let (_, analytic) = gradients(&weights, &features, &targets).unwrap();
        let analytic = flatten(&analytic);
        let numeric = numeric_gradients(&weights, &features, &targets, 1e-5);
        let err = analytic
            .iter()
            .zip(&numeric)
            .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6))
            .fold(0.0, f64::max);
        assert!(err < 1e-4, "case {case}: max relative error {err}");
        worst = worst.max(err);
    }
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    println!(
        "criterion 2 (gradient check, worst relative error {worst:.2e} in {:.2}s): PASS",
        elapsed.as_secs_f64()
    );
}

// ---------------------------------------------------------------------------
// criterion 3
// ---------------------------------------------------------------------------

#[test]
fn criterion_03_metric_oracles_reproduce_hand_derived_cases() {
    let params = MetricParams::default();
    let beats = |times: &[f64]| BeatList::from_times(times).unwrap();
    let grid = |start: f64, step: f64, n: usize| -> Vec<f64> {
        (0..n).map(|i| start + i as f64 * step).collect()
    };

    // identity
    let ann = beats(&grid(0.5, 0.5, 20));
    assert_eq!(f_measure(&ann, &ann, &params).f_measure, 1.0);
    let (cmlt, amlt) = continuity(&ann, &ann, &params).unwrap();
    assert_eq!((cmlt, amlt), (1.0, 1.0));

    // hand-counted F = 4/7
    let ann47 = beats(&[1.0, 2.0, 3.0, 4.0]);
    let est47 = beats(&[1.0, 2.0, 3.5]);
    let r = f_measure(&est47, &ann47, &params);
    assert!((r.f_measure - 4.0 / 7.0).abs() < 1e-12, "F = {}", r.f_measure);

    // empty estimate
    assert_eq!(f_measure(&beats(&[]), &ann, &params).f_measure, 0.0);

    // double tempo, phase aligned: low CMLt, AMLt = 1
    let ann_double = beats(&grid(1.0, 0.5, 24));
    let est_double = beats(&grid(1.0, 0.25, 47));
    let (cmlt, amlt) = continuity(&est_double, &ann_double, &params).unwrap();
    assert!(cmlt <= 0.5, "cmlt {cmlt}");
    assert_eq!(amlt, 1.0);

    // half-period offbeat: CMLt 0, AMLt = 1
    let est_off = beats(&grid(1.25, 0.5, 23));
    let (cmlt, amlt) = continuity(&est_off, &ann_double, &params).unwrap();
    assert_eq!(cmlt, 0.0);
    assert_eq!(amlt, 1.0);

    println!("criterion 3 (metric oracles, hand-derived cases exact): PASS");
}

// ---------------------------------------------------------------------------
// criteria 4-6 share the adaptation run
// ---------------------------------------------------------------------------

#[test]
fn criterion_04_small_data_adaptation_reaches_080_at_1_5_minutes() {
    let run = &*ADAPTATION_RUN;
    assert!(
        run.output.records().count() == 36,
        "expected 36 records, got {} (failures: {:?})",
        run.output.records().count(),
        run.output.cells.len() - run.output.records().count()
    );
    let subset9 = SubsetSize::Tracks(9);
    let bayes = seed_mean_beat_f(&run.output, "bayes", subset9);
    let fs = seed_mean_beat_f(&run.output, "fs", subset9);
    assert!(bayes >= 0.80, "bayes beat F at 1.5 min = {bayes:.3} < 0.80");
    assert!(fs >= 0.80, "fs beat F at 1.5 min = {fs:.3} < 0.80");
    assert!(
        run.wall < Duration::from_secs(1800),
        "matrix took {:?}, over the 30 min budget",
        run.wall
    );
    println!(
        "criterion 4 (1.5 min adaptation: bayes F={bayes:.3}, fs F={fs:.3}, wall {:.0}s): PASS",
        run.wall.as_secs_f64()
    );
}

#[test]
fn criterion_05_learning_curves_do_not_regress_from_4_to_74_tracks() {
    let run = &*ADAPTATION_RUN;
    for strategy in ["bayes", "fs"] {
        let at4 = seed_mean_beat_f(&run.output, strategy, SubsetSize::Tracks(4));
        let at74 = seed_mean_beat_f(&run.output, strategy, SubsetSize::Tracks(74));
        assert!(
            at74 >= at4,
            "{strategy}: beat F fell from {at4:.4} (4 tracks) to {at74:.4} (74 tracks)"
        );
        println!(
            "criterion 5 ({strategy}: beat F {at4:.3} at 4 tracks -> {at74:.3} at 74): PASS"
        );
    }
}

#[test]
fn criterion_06_bayes_trains_at_least_ten_times_faster() {
    let run = &*ADAPTATION_RUN;
    let subset4 = SubsetSize::Tracks(4);
    let bayes = mean_train_seconds(&run.output, "bayes", subset4);
    let fs = mean_train_seconds(&run.output, "fs", subset4);
    let ratio = fs / bayes;
    assert!(
        ratio >= 10.0,
        "train-time ratio fs/bayes = {ratio:.1} (bayes {bayes:.3}s, fs {fs:.3}s)"
    );
    println!(
        "criterion 6 (training speed: bayes {bayes:.2}s vs fs {fs:.2}s, ratio {ratio:.0}x): PASS"
    );
}

// ---------------------------------------------------------------------------
// criterion 7
// ---------------------------------------------------------------------------

#[test]
fn criterion_07_augmentation_is_exactly_five_fold() {
    let suites = &*SUITES;
    // short schedules: the contract is about counts, not convergence
    let mut ctx = samba_context(0);
    ctx.schedule_fs.max_epochs = 2;
    ctx.schedule_ft.max_epochs = 2;

    let registry = StrategyRegistry::builtin();
    let excerpts = load_dataset(&suites.samba, 0).unwrap();
    let (train, _) = split_train_test(excerpts, 0).unwrap();
    let mut logs = std::collections::BTreeMap::new();
    // fs / fsa first
    for name in ["fs", "fsa"] {
        let strategy = registry.get(name).unwrap();
        let snippets =
            make_snippets(&train, SubsetSize::Tracks(4), strategy.snippet_mode()).unwrap();
        let (_, log) = strategy.train(&snippets, &ctx).unwrap();
        logs.insert(name, log);
    }
    // the fine-tuned pair needs a checkpoint: a quick fs model on ballroom
    let baseline_path = suites.work.join("baseline_default.json");
    {
        let mut bctx = StrategyContext::new(77);
        bctx.schedule_fs.max_epochs = 3;
        let bexcerpts = load_dataset(&suites.ballroom, 77).unwrap();
        let (btrain, _) = split_train_test(bexcerpts, 77).unwrap();
        let strategy = registry.get("fs").unwrap();
        let snippets =
            make_snippets(&btrain, SubsetSize::Tracks(4), strategy.snippet_mode()).unwrap();
        let (tracker, _) = strategy.train(&snippets, &bctx).unwrap();
        tracker.save(&baseline_path).unwrap();
    }
    ctx.pretrained_path = Some(baseline_path);
    for name in ["ft", "fta"] {
        let strategy = registry.get(name).unwrap();
        let snippets =
            make_snippets(&train, SubsetSize::Tracks(4), strategy.snippet_mode()).unwrap();
        let (_, log) = strategy.train(&snippets, &ctx).unwrap();
        logs.insert(name, log);
    }

    assert_eq!(logs["fsa"].per_epoch_snippets, 5 * logs["fs"].per_epoch_snippets);
    assert_eq!(logs["fta"].per_epoch_snippets, 5 * logs["ft"].per_epoch_snippets);
    for name in ["fsa", "fta"] {
        assert_eq!(
            logs[name].frame_rates,
            vec![95.0, 97.5, 100.0, 102.5, 105.0],
            "{name} frame-rate set"
        );
    }
    for name in ["fs", "ft"] {
        assert_eq!(logs[name].frame_rates, vec![100.0]);
    }
    assert_eq!(frame_rate_variants(100.0), vec![95.0, 97.5, 100.0, 102.5, 105.0]);
    println!(
        "criterion 7 (augmentation five-fold: fs {} -> fsa {} snippets/epoch; rates ±2.5%/±5%): PASS",
        logs["fs"].per_epoch_snippets, logs["fsa"].per_epoch_snippets
    );
}

// ---------------------------------------------------------------------------
// criterion 8
// ---------------------------------------------------------------------------

fn suite_profile(manifest: &DatasetManifest) -> Vec<takt_core::profile::TatumStat> {
    let excerpts = load_dataset(manifest, 0).unwrap();
    let front_end = takt_core::strategy::FrontEndConfig::default();
    let mut prepared = Vec::new();
    for excerpt in &excerpts {
        let spec = front_end.spectrogram(&excerpt.audio).unwrap();
        let env = spectral_flux(&spec, &[(20.0, 200.0), (200.0, f64::MAX)], true).unwrap();
        let env = normalize_local(&env, 1.0).unwrap();
        prepared.push((env, excerpt.annotations.clone()));
    }
    let profile = compute_profile(&prepared, manifest.meter).unwrap();
    profile_stats(&profile).unwrap()
}

#[test]
fn criterion_08_profiles_recover_the_designed_accent_structure() {
    let suites = &*SUITES;

    // samba-like: the low band's maximum-median tatum is 5 (beat 2 of 2/4)
    let samba_stats = suite_profile(&suites.samba);
    let low: Vec<_> = samba_stats.iter().filter(|s| s.band == 0).collect();
    assert_eq!(low.len(), 8);
    let max_median = low
        .iter()
        .max_by(|a, b| a.median.partial_cmp(&b.median).unwrap())
        .unwrap();
    assert_eq!(
        max_median.tatum, 5,
        "samba low-band max-median tatum is {} (median {:.3})",
        max_median.tatum, max_median.median
    );

    // ballroom-like: beats outrank off-tatums in both bands
    let ballroom_stats = suite_profile(&suites.ballroom);
    for band in 0..2 {
        let stats: Vec<_> = ballroom_stats.iter().filter(|s| s.band == band).collect();
        let beat_min = stats
            .iter()
            .filter(|s| (s.tatum - 1) % 4 == 0)
            .map(|s| s.median)
            .fold(f64::INFINITY, f64::min);
        let off_max = stats
            .iter()
            .filter(|s| (s.tatum - 1) % 4 != 0)
            .map(|s| s.median)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(
            beat_min > off_max,
            "band {band}: weakest beat median {beat_min:.3} <= strongest off-tatum {off_max:.3}"
        );
    }
    println!(
        "criterion 8 (profiles: samba low-band peak at tatum 5; ballroom beats dominate both bands): PASS"
    );
}

// ---------------------------------------------------------------------------
// criterion 9
// ---------------------------------------------------------------------------

/// Small-model configuration: the protocol and its determinism are under
/// test here, not tracking quality.
fn tiny_config() -> CliConfig {
    CliConfig::from_toml_str(
        r#"
        [features]
        window_size = 1024

        [tcn]
        n_layers = 2
        base_channels = 4
        kernel_size = 3
        dilations = [1, 2]

        [schedule.fs]
        max_epochs = 2
        [schedule.ft]
        max_epochs = 2

        [bayes]
        n_positions = 608

        [decode]
        min_bpm = 85.0
        max_bpm = 135.0
        "#,
    )
    .unwrap()
}

/// Strip the wall-clock column: timings are real measurements and cannot be
/// identical across runs.
fn results_without_timing(path: &std::path::Path) -> String {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines()
        .map(|line| {
            let mut fields: Vec<&str> = line.split(',').collect();
            fields.pop();
            fields.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn criterion_09_full_matrix_is_leak_free_and_reproducible() {
    let suites = &*SUITES;
    let config = tiny_config();
    let ctx = config.strategy_context(0).unwrap();

    // tiny baseline checkpoint (matching architecture) for ft/fta
    let baseline_path = suites.work.join("baseline_tiny.json");
    {
        let mut bctx = config.strategy_context(900).unwrap();
        bctx.schedule_fs.max_epochs = 2;
        let registry = StrategyRegistry::builtin();
        let excerpts = load_dataset(&suites.ballroom, 900).unwrap();
        let (train, _) = split_train_test(excerpts, 900).unwrap();
        let strategy = registry.get("fs").unwrap();
        let snippets =
            make_snippets(&train, SubsetSize::Tracks(4), strategy.snippet_mode()).unwrap();
        let (tracker, _) = strategy.train(&snippets, &bctx).unwrap();
        tracker.save(&baseline_path).unwrap();
    }
    let ctx = StrategyContext {
        pretrained_path: Some(baseline_path),
        ..ctx
    };

    let spec = MatrixSpec {
        strategies: vec!["bayes".into(), "fs".into(), "ft".into(), "fsa".into(), "fta".into()],
        subsets: SUBSET_LADDER.iter().map(|&n| SubsetSize::Tracks(n)).collect(),
        seeds: (0..10).collect(),
        workers: 4,
    };
    assert_eq!(spec.cell_count(), 300);

    // leakage audit over every planned cell
    let plans = plan_matrix(&spec, &suites.samba).unwrap();
    assert_eq!(plans.len(), 300);
    audit_plan(&plans).unwrap();

    let metrics = MetricParams::default();
    let out_a = suites.work.join("matrix_a");
    let out_b = suites.work.join("matrix_b");
    let run_a = run_matrix(&spec, &suites.samba, &ctx, &metrics, &out_a).unwrap();
    let run_b = run_matrix(&spec, &suites.samba, &ctx, &metrics, &out_b).unwrap();

    assert_eq!(run_a.records().count(), 300, "cells failed in run A");
    assert_eq!(run_b.records().count(), 300, "cells failed in run B");

    // audit the executed records too: provenance equals the plan
    for (record, plan) in run_a.records().zip(&plans) {
        assert_eq!(record.test_track_ids, plan.test_track_ids);
        for id in &record.train_track_ids {
            assert!(!record.test_track_ids.contains(id), "leaked {id}");
        }
        assert_eq!(record.per_track.len(), record.test_track_ids.len());
    }

    // reproducibility: identical metric rows, identical aggregates
    assert_eq!(
        results_without_timing(&run_a.results_csv),
        results_without_timing(&run_b.results_csv),
        "results.csv metric columns differ between runs"
    );
    assert_eq!(
        std::fs::read(&run_a.summary_csv).unwrap(),
        std::fs::read(&run_b.summary_csv).unwrap(),
        "summary.csv differs between runs"
    );
    assert_eq!(
        std::fs::read(&run_a.plot_perf_csv).unwrap(),
        std::fs::read(&run_b.plot_perf_csv).unwrap(),
        "plotdata_perf.csv differs between runs"
    );
    println!(
        "criterion 9 (300-cell matrix: zero leakage, metric output byte-identical across runs): PASS"
    );
}

// ---------------------------------------------------------------------------
// criterion 10
// ---------------------------------------------------------------------------

#[test]
fn criterion_10_real_candombe_when_available() {
    let path = match std::env::var("CANDOMBE_MANIFEST") {
        Ok(p) => p,
        Err(_) => {
            println!(
                "criterion 10 (real candombe end-to-end): SKIPPED — set CANDOMBE_MANIFEST to run"
            );
            return;
        }
    };
    let manifest = DatasetManifest::load(&path).unwrap();
    let mut ctx = StrategyContext::new(0);
    ctx.tempo_range = TempoRange::CANDOMBE;
    let record = run_strategy(
        "bayes",
        SubsetSize::All,
        0,
        &manifest,
        &ctx,
        &MetricParams::default(),
    )
    .unwrap();
    let mean_f = record
        .per_track
        .iter()
        .map(|t| t.beat.f_measure)
        .sum::<f64>()
        / record.per_track.len() as f64;
    assert!(
        mean_f >= 0.95,
        "candombe beat F = {mean_f:.3} below the 0.95 floor"
    );
    println!("criterion 10 (real candombe, bayes beat F = {mean_f:.3}): PASS");
}
