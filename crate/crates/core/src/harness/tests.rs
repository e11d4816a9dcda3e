use super::*;
use crate::audio::write_wav;
use crate::beats::{BeatEvent, BeatList};
use std::path::Path;

/// Write a dataset of `n_files` recordings of `seconds` each at a tiny
/// sample rate (audio content is irrelevant for protocol tests).
fn tiny_dataset(dir: &Path, n_files: usize, seconds: f64) -> DatasetManifest {
    let sr = 1000u32;
    let mut entries = Vec::new();
    for i in 0..n_files {
        let id = format!("t{i:03}");
        let n = (seconds * sr as f64) as usize;
        let audio = AudioBuffer::new(vec![0.05; n], sr).unwrap();
        write_wav(dir.join(format!("{id}.wav")), &audio).unwrap();
        let events: Vec<BeatEvent> = (0..)
            .map(|k| BeatEvent {
                time: 0.25 + k as f64 * 0.5,
                position: Some((k % 4) as u32 + 1),
            })
            .take_while(|e| e.time < seconds - 0.1)
            .collect();
        BeatList::new(events, Some(4))
            .unwrap()
            .write(dir.join(format!("{id}.beats")))
            .unwrap();
        entries.push(ManifestEntry {
            id,
            audio: format!("t{i:03}.wav").into(),
            annotations: format!("t{i:03}.beats").into(),
        });
    }
    let manifest = DatasetManifest {
        dataset_name: "tiny".into(),
        meter: 4,
        entries,
        base_dir: dir.to_path_buf(),
    };
    manifest.save(dir.join("manifest.json")).unwrap();
    DatasetManifest::load(dir.join("manifest.json")).unwrap()
}

#[test]
fn ninety_five_seconds_become_three_excerpts() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = tiny_dataset(dir.path(), 1, 95.0);
    let excerpts = load_dataset(&manifest, 0).unwrap();
    assert_eq!(excerpts.len(), 3);
    for e in &excerpts {
        assert_eq!(e.audio.samples.len(), 30_000);
    }
    assert_eq!(excerpts[0].id, "t000#0");
    assert_eq!(excerpts[2].id, "t000#2");
}

#[test]
fn annotations_are_reoffset_per_excerpt() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = tiny_dataset(dir.path(), 1, 95.0);
    let excerpts = load_dataset(&manifest, 0).unwrap();
    // the source has a beat at 31.25 s; excerpt 1 must hold it at 1.25 s
    let second = &excerpts[1];
    assert!(second
        .annotations
        .times()
        .iter()
        .any(|&t| (t - 1.25).abs() < 1e-9));
    assert!(second.annotations.times().iter().all(|&t| (0.0..30.0).contains(&t)));
}

#[test]
fn oversized_datasets_are_sampled_to_the_cap() {
    let dir = tempfile::tempdir().unwrap();
    // 32 recordings x 3 excerpts = 96 > 93
    let manifest = tiny_dataset(dir.path(), 32, 95.0);
    let a = load_dataset(&manifest, 1).unwrap();
    assert_eq!(a.len(), EXCERPT_CAP);
    let b = load_dataset(&manifest, 1).unwrap();
    let ids = |v: &[Excerpt]| v.iter().map(|e| e.id.clone()).collect::<Vec<_>>();
    assert_eq!(ids(&a), ids(&b));
    let c = load_dataset(&manifest, 2).unwrap();
    assert_ne!(ids(&a), ids(&c), "different seeds should sample differently");
}

#[test]
fn split_is_eighty_twenty_disjoint_and_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = tiny_dataset(dir.path(), 32, 95.0);
    let excerpts = load_dataset(&manifest, 0).unwrap();
    assert_eq!(excerpts.len(), 93);
    let (train, test) = split_train_test(excerpts.clone(), 7).unwrap();
    assert_eq!(train.len(), 74);
    assert_eq!(test.len(), 19);
    let train_ids: std::collections::HashSet<_> = train.iter().map(|e| e.id.clone()).collect();
    assert!(test.iter().all(|e| !train_ids.contains(&e.id)));
    let (train2, _) = split_train_test(excerpts, 7).unwrap();
    assert_eq!(
        train.iter().map(|e| &e.id).collect::<Vec<_>>(),
        train2.iter().map(|e| &e.id).collect::<Vec<_>>()
    );
}

#[test]
fn subset_minutes_labels_match_the_ladder() {
    let labels: Vec<String> = SUBSET_LADDER
        .iter()
        .map(|&n| SubsetSize::Tracks(n).minutes_label())
        .collect();
    assert_eq!(labels, vec!["0.67", "1.50", "3.00", "6.17", "9.17", "12.33"]);
    assert_eq!(SubsetSize::All.minutes_label(), "all");
}

#[test]
fn tcn_snippets_are_adjacent_and_disjoint() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = tiny_dataset(dir.path(), 2, 31.0);
    let excerpts = load_dataset(&manifest, 0).unwrap();
    let set = make_snippets(&excerpts, SubsetSize::Tracks(2), SnippetMode::SplitHalves).unwrap();
    assert_eq!(set.train.len(), 2);
    assert_eq!(set.val.len(), 2);
    for (train, val) in set.train.iter().zip(&set.val) {
        assert_eq!(train.audio.samples.len(), 5000);
        assert_eq!(val.audio.samples.len(), 5000);
        // train holds [0, 5) annotations; val holds [5, 10) re-offset
        assert!(train.annotations.times().iter().all(|&t| t < 5.0));
        assert!(val.annotations.times().iter().all(|&t| t < 5.0));
        // the source beat at 5.25 s shows up in val at 0.25 s
        assert!(val.annotations.times().iter().any(|&t| (t - 0.25).abs() < 1e-9));
    }
}

#[test]
fn bayes_snippets_take_the_whole_window() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = tiny_dataset(dir.path(), 2, 31.0);
    let excerpts = load_dataset(&manifest, 0).unwrap();
    let set = make_snippets(&excerpts, SubsetSize::Tracks(2), SnippetMode::WholeWindow).unwrap();
    assert_eq!(set.train.len(), 2);
    assert!(set.val.is_empty());
    assert_eq!(set.train[0].audio.samples.len(), 10_000);
    assert!(set.train[0].annotations.times().iter().all(|&t| t < 10.0));
}

#[test]
fn all_mode_splits_seventy_five_twenty_five() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = tiny_dataset(dir.path(), 32, 95.0);
    let excerpts = load_dataset(&manifest, 0).unwrap();
    let (train, _) = split_train_test(excerpts, 0).unwrap();
    let set = make_snippets(&train, SubsetSize::All, SnippetMode::SplitHalves).unwrap();
    assert_eq!(set.train.len(), 55); // floor(74 * 0.75)
    assert_eq!(set.val.len(), 19);
    assert_eq!(set.train[0].audio.samples.len(), 30_000); // full excerpts
}

#[test]
fn subset_larger_than_train_set_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = tiny_dataset(dir.path(), 2, 31.0);
    let excerpts = load_dataset(&manifest, 0).unwrap();
    assert!(make_snippets(&excerpts, SubsetSize::Tracks(5), SnippetMode::SplitHalves).is_err());
}

#[test]
fn short_excerpts_cannot_be_snipped() {
    let _dir = tempfile::tempdir().unwrap();
    let sr = 1000u32;
    let audio = AudioBuffer::new(vec![0.0; 8 * sr as usize], sr).unwrap();
    let excerpt = Excerpt {
        id: "short".into(),
        audio,
        annotations: BeatList::from_times(&[0.5, 1.0]).unwrap(),
        beats_per_bar: 4,
    };
    match make_snippets(&[excerpt], SubsetSize::Tracks(1), SnippetMode::SplitHalves) {
        Err(Error::InputTooShort(_)) => {}
        other => panic!("expected InputTooShort, got {other:?}"),
    }
}

#[test]
fn missing_annotation_file_is_reported_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let _ = tiny_dataset(dir.path(), 1, 35.0);
    std::fs::remove_file(dir.path().join("t000.beats")).unwrap();
    match DatasetManifest::load(dir.path().join("manifest.json")) {
        Err(Error::InvalidInput(msg)) => assert!(msg.contains("t000.beats"), "{msg}"),
        other => panic!("expected InvalidInput, got {other:?}"),
    }
}

#[test]
fn unparsable_annotation_line_is_located() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = tiny_dataset(dir.path(), 1, 35.0);
    std::fs::write(dir.path().join("t000.beats"), "0.5\t1\nnot-a-number\t2\n").unwrap();
    match load_dataset(&manifest, 0) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
        other => panic!("expected Parse error, got {other:?}"),
    }
}

#[test]
fn matrix_plan_counts_and_audits_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = tiny_dataset(dir.path(), 32, 95.0);
    let spec = MatrixSpec {
        strategies: vec!["bayes".into(), "fs".into(), "ft".into(), "fsa".into(), "fta".into()],
        subsets: SUBSET_LADDER.iter().map(|&n| SubsetSize::Tracks(n)).collect(),
        seeds: (0..10).collect(),
        workers: 1,
    };
    let plans = plan_matrix(&spec, &manifest).unwrap();
    assert_eq!(plans.len(), 300);
    audit_plan(&plans).unwrap();
    // identical plans on a second pass
    let again = plan_matrix(&spec, &manifest).unwrap();
    for (a, b) in plans.iter().zip(&again) {
        assert_eq!(a.train_track_ids, b.train_track_ids);
        assert_eq!(a.test_track_ids, b.test_track_ids);
    }
}

#[test]
fn audit_catches_injected_leakage() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = tiny_dataset(dir.path(), 32, 95.0);
    let spec = MatrixSpec {
        strategies: vec!["bayes".into()],
        subsets: vec![SubsetSize::Tracks(4)],
        seeds: vec![0],
        workers: 1,
    };
    let mut plans = plan_matrix(&spec, &manifest).unwrap();
    let stolen = plans[0].test_track_ids[0].clone();
    plans[0].train_track_ids.push(stolen);
    assert!(audit_plan(&plans).is_err());
}
