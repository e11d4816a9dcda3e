//! Cross-module integration: strategy determinism, model file round trips,
//! and the baseline tracker on generated audio.

use once_cell::sync::Lazy;

use takt_core::decode::{ellis_track, TempoRange};
use takt_core::harness::{run_strategy, DatasetManifest, ManifestEntry, SubsetSize};
use takt_core::metrics::MetricParams;
use takt_core::strategy::{load_model, FrontEndConfig, StrategyContext, TrackFeatures};
use takt_core::synth::{generate, suite_accents, Band, RhythmSpec, SuiteKind};

/// A 12-excerpt samba-like mini dataset (enough for subset 4 protocols).
struct MiniSet {
    _dir: tempfile::TempDir,
    manifest: DatasetManifest,
}

static MINI: Lazy<MiniSet> = Lazy::new(|| {
    let dir = tempfile::tempdir().unwrap();
    let mut entries = Vec::new();
    for i in 0..12u64 {
        let mut spec = RhythmSpec::clean(
            2,
            100.0 + 3.0 * i as f64,
            suite_accents(SuiteKind::SambaLike),
            26,
            40 + i,
        );
        spec.timing_jitter_s = 0.003;
        let (audio, ann) = generate(&spec, 44100).unwrap();
        // pad to a full excerpt window
        let mut samples = audio.samples;
        samples.resize(30 * 44100, 0.0);
        let audio = takt_core::audio::AudioBuffer::new(samples, 44100).unwrap();
        let id = format!("mini_{i:02}");
        takt_core::audio::write_wav(dir.path().join(format!("{id}.wav")), &audio).unwrap();
        ann.write(dir.path().join(format!("{id}.beats"))).unwrap();
        entries.push(ManifestEntry {
            id: id.clone(),
            audio: format!("{id}.wav").into(),
            annotations: format!("{id}.beats").into(),
        });
    }
    let manifest = DatasetManifest {
        dataset_name: "mini".into(),
        meter: 2,
        entries,
        base_dir: dir.path().to_path_buf(),
    };
    manifest.save(dir.path().join("manifest.json")).unwrap();
    let manifest = DatasetManifest::load(dir.path().join("manifest.json")).unwrap();
    MiniSet {
        _dir: dir,
        manifest,
    }
});

fn fast_ctx(seed: u64) -> StrategyContext {
    let mut ctx = StrategyContext::new(seed);
    ctx.tempo_range = TempoRange::new(80.0, 140.0).unwrap();
    ctx.schedule_fs.max_epochs = 3;
    ctx
}

#[test]
fn identical_cells_produce_identical_metrics() {
    let mini = &*MINI;
    let metrics = MetricParams::default();
    for strategy in ["bayes", "fs"] {
        let ctx = fast_ctx(3);
        let a = run_strategy(strategy, SubsetSize::Tracks(4), 3, &mini.manifest, &ctx, &metrics)
            .unwrap();
        let b = run_strategy(strategy, SubsetSize::Tracks(4), 3, &mini.manifest, &ctx, &metrics)
            .unwrap();
        assert_eq!(a.per_track.len(), b.per_track.len());
        for (x, y) in a.per_track.iter().zip(&b.per_track) {
            assert_eq!(x.track_id, y.track_id);
            assert_eq!(x.beat.f_measure, y.beat.f_measure, "{strategy}");
            assert_eq!(x.beat.cmlt, y.beat.cmlt);
            assert_eq!(x.downbeat.f_measure, y.downbeat.f_measure);
        }
    }
}

#[test]
fn saved_models_track_identically_after_reload() {
    let mini = &*MINI;
    let dir = tempfile::tempdir().unwrap();
    let registry = takt_core::strategy::StrategyRegistry::builtin();
    let excerpts = takt_core::harness::load_dataset(&mini.manifest, 1).unwrap();
    let (train, test) = takt_core::harness::split_train_test(excerpts, 1).unwrap();
    let probe = &test[0];
    let features = TrackFeatures::from_audio(&probe.audio, &FrontEndConfig::default()).unwrap();

    for name in ["bayes", "fs"] {
        let ctx = fast_ctx(1);
        let strategy = registry.get(name).unwrap();
        let snippets = takt_core::harness::make_snippets(
            &train,
            SubsetSize::Tracks(4),
            strategy.snippet_mode(),
        )
        .unwrap();
        let (tracker, _) = strategy.train(&snippets, &ctx).unwrap();
        let before = tracker.track(&features).unwrap();
        let path = dir.path().join(format!("{name}.json"));
        tracker.save(&path).unwrap();
        let (_, reloaded) = load_model(&path).unwrap();
        let after = reloaded.track(&features).unwrap();
        assert_eq!(before.beats.times(), after.beats.times(), "{name}");
        assert_eq!(before.downbeats.times(), after.downbeats.times());
    }
}

#[test]
fn ellis_recovers_the_tempo_of_generated_clicks() {
    // beats only, no off-tatum strokes: a metronome
    let mut accents = vec![Vec::new(); 8];
    accents[0].push(takt_core::synth::Accent::fixed(1.0, 0.9, Band::High));
    accents[4].push(takt_core::synth::Accent::fixed(1.0, 0.9, Band::High));
    let spec = RhythmSpec::clean(2, 100.0, accents, 24, 5);
    let (audio, ann) = generate(&spec, 44100).unwrap();
    let front_end = FrontEndConfig::default();
    let spect = front_end.spectrogram(&audio).unwrap();
    let env = front_end.flux_envelope(&spect).unwrap();
    let beats = ellis_track(&env, &TempoRange::new(70.0, 150.0).unwrap()).unwrap();
    let times = beats.times();
    let mean_ibi: f64 =
        times.windows(2).map(|w| w[1] - w[0]).sum::<f64>() / (times.len() - 1) as f64;
    let bpm = 60.0 / mean_ibi;
    assert!((bpm - 100.0).abs() < 2.0, "tempo {bpm:.2}");
    // beats land on annotated clicks
    let hits = times
        .iter()
        .filter(|&&t| {
            ann.times()
                .iter()
                .any(|&a| (t - a).abs() <= 0.02)
        })
        .count();
    assert!(
        hits as f64 >= 0.9 * times.len() as f64,
        "{hits}/{} beats on clicks",
        times.len()
    );
}
