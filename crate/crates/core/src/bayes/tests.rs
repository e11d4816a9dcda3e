use super::*;
use crate::audio::OnsetEnvelope;
use crate::beats::{BeatEvent, BeatList};
use crate::hmm::PhaseStateSpace;

fn env2(values_low: Vec<f64>, values_high: Vec<f64>, fps: f64) -> OnsetEnvelope {
    assert_eq!(values_low.len(), values_high.len());
    let mut interleaved = Vec::with_capacity(values_low.len() * 2);
    for (l, h) in values_low.iter().zip(&values_high) {
        interleaved.push(*l);
        interleaved.push(*h);
    }
    OnsetEnvelope::new(interleaved, 2, fps, vec![(0.0, 250.0), (250.0, 22050.0)])
}

fn annotated_bars(n_bars: u32, beats_per_bar: u32, beat_seconds: f64) -> BeatList {
    let events = (0..n_bars * beats_per_bar)
        .map(|i| BeatEvent {
            time: i as f64 * beat_seconds,
            position: Some(i % beats_per_bar + 1),
        })
        .collect();
    BeatList::new(events, Some(beats_per_bar)).unwrap()
}

/// 4/4 fixture at 120 BPM: low-band impulse on the downbeat, high-band
/// impulse on every beat. A lead-in that is not a whole beat keeps the first
/// event away from the signal edge.
fn rhythm_fixture(n_bars: u32) -> (OnsetEnvelope, BeatList) {
    let fps = 100.0;
    let beat = 0.5;
    let lead_in = 0.27;
    let ann = annotated_bars(n_bars, 4, beat).shifted(lead_in);
    let n_frames = ((lead_in + n_bars as f64 * 4.0 * beat - beat + 0.2) * fps) as usize;
    let mut low = vec![0.0; n_frames];
    let mut high = vec![0.0; n_frames];
    for e in &ann.events {
        let frame = (e.time * fps).round() as usize;
        if frame < n_frames {
            high[frame] = 1.0;
            if e.position == Some(1) {
                low[frame] = 1.0;
            }
        }
    }
    (env2(low, high, fps), ann)
}

#[test]
fn constant_envelope_quantizes_to_constant_bins() {
    let n = 900;
    let env = env2(vec![3.5; n], vec![3.5; n], 100.0);
    let ann = annotated_bars(2, 4, 1.0);
    let grid = BarGrid::new(4, 16).unwrap();
    let bars = quantize_to_grid(&env, &ann, &grid).unwrap();
    assert_eq!(bars.len(), 1); // second bar has no bounding beat
    for bin in &bars[0] {
        assert!((bin[0] - 3.5).abs() < 1e-12 && (bin[1] - 3.5).abs() < 1e-12);
    }
}

#[test]
fn beat_impulses_land_on_beat_bins() {
    let fps = 100.0;
    let beat = 0.5;
    let ann = annotated_bars(3, 4, beat);
    let n = (3.0 * 4.0 * beat * fps) as usize + 10;
    let mut low = vec![0.0; n];
    for e in &ann.events {
        low[(e.time * fps).round() as usize] = 1.0;
    }
    let env = env2(low.clone(), low, fps);
    let grid = BarGrid::new(4, 16).unwrap();
    let bars = quantize_to_grid(&env, &ann, &grid).unwrap();
    for bar in &bars {
        for (bin, value) in bar.iter().enumerate() {
            if bin % 16 == 0 {
                assert!(value[0] > 0.0, "bin {bin} should catch the beat impulse");
            } else {
                assert_eq!(value[0], 0.0, "bin {bin} should be silent");
            }
        }
    }
}

#[test]
fn identical_bars_quantize_identically() {
    let (env, ann) = rhythm_fixture(4);
    let grid = BarGrid::new(4, 16).unwrap();
    let bars = quantize_to_grid(&env, &ann, &grid).unwrap();
    assert!(bars.len() >= 2);
    assert_eq!(bars[0], bars[1]);
}

#[test]
fn no_complete_bar_is_an_error() {
    let env = env2(vec![0.0; 100], vec![0.0; 100], 100.0);
    let ann = BeatList::new(
        vec![
            BeatEvent { time: 0.1, position: Some(2) },
            BeatEvent { time: 0.6, position: Some(3) },
        ],
        Some(4),
    )
    .unwrap();
    let grid = BarGrid::new(4, 16).unwrap();
    match quantize_to_grid(&env, &ann, &grid) {
        Err(Error::NoCompleteBar(_)) => {}
        other => panic!("expected NoCompleteBar, got {other:?}"),
    }
}

#[test]
fn empty_bin_error_names_the_bin() {
    let samples = vec![vec![vec![1.0]], Vec::new(), vec![vec![2.0]]];
    match fit_gmm(&samples, 2, 0) {
        Err(Error::EmptyGridBin(msg)) => assert!(msg.contains("bin 1"), "{msg}"),
        other => panic!("expected EmptyGridBin, got {other:?}"),
    }
}

#[test]
fn states_sharing_a_bin_share_observation_scores() {
    let (env, ann) = rhythm_fixture(6);
    let config = BayesTrainConfig::default();
    let model = bayes_train(&[(env, ann)], &config).unwrap();
    let scores = observation_loglik(&model, &[0.4, 0.2]).unwrap();
    // positions 0 and 1 map to grid bin 0 (1216 positions, 64 bins => 19 each)
    assert_eq!(scores[0], scores[1]);
    assert_eq!(scores[0], scores[18]);
    assert_ne!(scores[0], scores[19]);
}

#[test]
fn gmm_scores_mean_above_three_sigma_point() {
    let samples: Vec<Vec<f64>> = (0..50).map(|i| vec![0.5 + 0.01 * (i % 5) as f64]).collect();
    let (g, _) = GaussianMixture::fit(&samples, 1, 0).unwrap();
    let mean = g.components[0].mean[0];
    let sigma = g.components[0].var[0].sqrt();
    assert!(g.log_pdf(&[mean]) >= g.log_pdf(&[mean + 3.0 * sigma]));
}

#[test]
fn constant_tempo_path_decodes_to_constant_intervals() {
    let space = PhaseStateSpace::new(64, vec![4], 0.0).unwrap();
    let states: Vec<usize> = (0..120).map(|t| (t * 4) % 64).collect();
    let beats = decode_events(&space, &states, 100.0, 0.0, 4).unwrap();
    assert!(beats.len() > 10);
    let times = beats.times();
    let ibis: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    for ibi in &ibis {
        assert!((ibi - 0.04).abs() < 0.010001, "ibi {ibi}");
    }
}

#[test]
fn path_without_boundary_crossings_emits_nothing() {
    let space = PhaseStateSpace::new(64, vec![1], 0.0).unwrap();
    // Positions 2..9 stay inside the first beat sub-cycle (0..16).
    let states: Vec<usize> = (2..10).collect();
    let beats = decode_events(&space, &states, 100.0, 0.0, 4).unwrap();
    assert!(beats.is_empty());
}

#[test]
fn every_fourth_beat_is_a_downbeat_on_a_steady_path() {
    let space = PhaseStateSpace::new(64, vec![2], 0.0).unwrap();
    let states: Vec<usize> = (0..200).map(|t| (t * 2) % 64).collect();
    let beats = decode_events(&space, &states, 100.0, 0.0, 4).unwrap();
    for (i, e) in beats.events.iter().enumerate() {
        let expected = (i % 4) as u32 + 1;
        assert_eq!(e.position, Some(expected), "beat {i}");
    }
}

#[test]
fn decoded_beat_count_equals_independent_crossing_count() {
    let space = PhaseStateSpace::new(96, vec![3, 5], 0.0).unwrap();
    // Alternate tempo indices for an uneven path.
    let mut states = Vec::new();
    let mut m = 7usize;
    for t in 0..150 {
        let ti = (t / 30) % 2;
        states.push(space.state_index(ti, m));
        m = (m + space.tempos[ti]) % 96;
    }
    let beats = decode_events(&space, &states, 100.0, 0.0, 4).unwrap();
    // Independent count: total advance past boundaries, including frame 0.
    let sub = 96 / 4;
    let mut count = 0usize;
    let m0 = space.position_of(states[0]);
    if m0 % sub < space.tempos[space.tempo_idx_of(states[0])] {
        count += 1;
    }
    let mut prev = m0;
    for &s in &states[1..] {
        let m = space.position_of(s);
        let advance = (m + 96 - prev) % 96;
        count += (prev % sub + advance) / sub;
        prev = m;
    }
    assert_eq!(beats.len(), count);
}

#[test]
fn training_is_deterministic() {
    let (env, ann) = rhythm_fixture(6);
    let config = BayesTrainConfig::default();
    let a = bayes_train(&[(env.clone(), ann.clone())], &config).unwrap();
    let b = bayes_train(&[(env, ann)], &config).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
}

#[test]
fn four_ten_second_snippets_train_a_valid_model() {
    // The smallest subset in the protocol: 4 tracks x 10 s.
    let excerpts: Vec<(OnsetEnvelope, BeatList)> = (0..4)
        .map(|_| {
            let (env, ann) = rhythm_fixture(5); // 5 bars at 2 s = 10 s
            (env, ann)
        })
        .collect();
    let model = bayes_train(&excerpts, &BayesTrainConfig::default()).unwrap();
    assert_eq!(model.obs.per_bin.len(), 64);
    assert!(!model.tempos.is_empty());
}

#[test]
fn learned_tempo_range_brackets_the_true_tempo() {
    let (env, ann) = rhythm_fixture(6);
    let model = bayes_train(&[(env, ann)], &BayesTrainConfig::default()).unwrap();
    let lo = model.increment_to_bpm(*model.tempos.first().unwrap());
    let hi = model.increment_to_bpm(*model.tempos.last().unwrap());
    assert!(lo <= 120.0 && 120.0 <= hi, "range [{lo}, {hi}]");
}

#[test]
fn tracking_the_training_snippet_recovers_every_beat() {
    let (env, ann) = rhythm_fixture(8);
    let model = bayes_train(&[(env.clone(), ann.clone())], &BayesTrainConfig::default()).unwrap();
    let est = bayes_track(&model, &env).unwrap();
    // One-to-one within 70 ms.
    assert_eq!(est.len(), ann.len(), "est {:?}", est.times());
    for (e, a) in est.events.iter().zip(&ann.events) {
        assert!(
            (e.time - a.time).abs() <= 0.07,
            "est {} vs ann {}",
            e.time,
            a.time
        );
    }
    // Downbeats line up with annotated downbeats.
    let est_db = est.downbeats();
    let ann_db = ann.downbeats();
    assert_eq!(est_db.len(), ann_db.len());
    for (e, a) in est_db.events.iter().zip(&ann_db.events) {
        assert!((e.time - a.time).abs() <= 0.07);
    }
}

#[test]
fn silence_tracks_without_crashing() {
    let (env, ann) = rhythm_fixture(6);
    let model = bayes_train(&[(env, ann)], &BayesTrainConfig::default()).unwrap();
    let silent = env2(vec![0.0; 400], vec![0.0; 400], 100.0);
    let result = bayes_track(&model, &silent).unwrap();
    for pair in result.events.windows(2) {
        assert!(pair[1].time > pair[0].time);
    }
}

#[test]
fn amplitude_scaling_does_not_change_the_decode() {
    let (env, ann) = rhythm_fixture(6);
    let model = bayes_train(&[(env.clone(), ann)], &BayesTrainConfig::default()).unwrap();
    let doubled = {
        let values: Vec<f64> = (0..env.n_frames())
            .flat_map(|t| env.frame(t).iter().map(|v| v * 2.0).collect::<Vec<_>>())
            .collect();
        let mut e = OnsetEnvelope::new(values, 2, env.frame_rate, env.band_edges.clone());
        e.frame_offset = env.frame_offset;
        e
    };
    let a = bayes_track(&model, &env).unwrap();
    let b = bayes_track(&model, &doubled).unwrap();
    assert_eq!(a.events.len(), b.events.len());
    for (x, y) in a.events.iter().zip(&b.events) {
        assert_eq!(x.time, y.time);
        assert_eq!(x.position, y.position);
    }
}

#[test]
fn frame_rate_mismatch_is_rejected() {
    let (env, ann) = rhythm_fixture(6);
    let model = bayes_train(&[(env, ann)], &BayesTrainConfig::default()).unwrap();
    let wrong = env2(vec![0.0; 100], vec![0.0; 100], 50.0);
    match bayes_track(&model, &wrong) {
        Err(Error::FrameRateMismatch { .. }) => {}
        other => panic!("expected FrameRateMismatch, got {other:?}"),
    }
}
