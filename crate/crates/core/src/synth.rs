//! Synthetic percussion corpus generator: band-limited strokes placed on a
//! tatum grid with exact ground-truth annotations, plus three genre-inspired
//! suites used as desk-scale test fixtures.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::audio::{write_wav, AudioBuffer};
use crate::beats::{BeatEvent, BeatList};
use crate::error::{Error, Result};
use crate::harness::{DatasetManifest, ManifestEntry, EXCERPT_CAP, EXCERPT_SECONDS};

pub const TATUMS_PER_BEAT: u32 = 4;

/// Frequency band a stroke lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    /// Decaying 80-180 Hz tone.
    Low,
    /// High-passed noise burst.
    High,
}

/// Stochastic accent at one tatum position.
#[derive(Debug, Clone, Copy)]
pub struct Accent {
    pub probability: f64,
    pub strength_min: f64,
    pub strength_max: f64,
    pub band: Band,
}

impl Accent {
    pub fn fixed(probability: f64, strength: f64, band: Band) -> Self {
        Self {
            probability,
            strength_min: strength,
            strength_max: strength,
            band,
        }
    }

    pub fn varied(probability: f64, lo: f64, hi: f64, band: Band) -> Self {
        Self {
            probability,
            strength_min: lo,
            strength_max: hi,
            band,
        }
    }
}

/// One excerpt's rhythm: meter, tempo (optionally drifting linearly over the
/// beats), per-tatum accents, and the bar count. The jitter/ghost/noise
/// knobs add performance-like imperfection; all default to zero.
#[derive(Debug, Clone)]
pub struct RhythmSpec {
    pub beats_per_bar: u32,
    pub tempo_start_bpm: f64,
    pub tempo_end_bpm: f64,
    /// Accent lists indexed by tatum within the bar
    /// (`beats_per_bar * TATUMS_PER_BEAT` entries).
    pub accents: Vec<Vec<Accent>>,
    pub n_bars: u32,
    /// Silence before the first beat, in beats (kept away from whole and
    /// half beats so edge beats stay decodable).
    pub lead_in_beats: f64,
    /// Standard deviation of stroke placement around the tatum grid, in
    /// seconds (annotations stay exact).
    pub timing_jitter_s: f64,
    /// Rate of off-grid low-band ghost strokes, per second.
    pub ghost_rate_hz: f64,
    /// Amplitude of an additive broadband noise floor.
    pub noise_floor: f64,
    /// Per-excerpt gains of the (low, high) stroke bands.
    pub band_gains: (f64, f64),
    pub seed: u64,
}

impl RhythmSpec {
    /// A clean spec: no jitter, ghosts or noise, unit band gains.
    pub fn clean(
        beats_per_bar: u32,
        tempo_bpm: f64,
        accents: Vec<Vec<Accent>>,
        n_bars: u32,
        seed: u64,
    ) -> Self {
        Self {
            beats_per_bar,
            tempo_start_bpm: tempo_bpm,
            tempo_end_bpm: tempo_bpm,
            accents,
            n_bars,
            lead_in_beats: 0.55,
            timing_jitter_s: 0.0,
            ghost_rate_hz: 0.0,
            noise_floor: 0.0,
            band_gains: (1.0, 1.0),
            seed,
        }
    }
}

impl RhythmSpec {
    fn validate(&self) -> Result<()> {
        if self.tempo_start_bpm <= 0.0 || self.tempo_end_bpm <= 0.0 {
            return Err(Error::InvalidInput("tempo must be positive".into()));
        }
        if self.n_bars == 0 || self.beats_per_bar == 0 {
            return Err(Error::InvalidInput("empty rhythm".into()));
        }
        let expected = (self.beats_per_bar * TATUMS_PER_BEAT) as usize;
        if self.accents.len() != expected {
            return Err(Error::InvalidInput(format!(
                "{} accent slots for a {expected}-tatum bar",
                self.accents.len()
            )));
        }
        for accents in &self.accents {
            for a in accents {
                if !(0.0..=1.0).contains(&a.probability) {
                    return Err(Error::InvalidInput(
                        "accent probability outside [0, 1]".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Render a rhythm spec to audio with its exact beat annotations.
/// Deterministic per seed; output peak is kept at or below 1.
pub fn generate(spec: &RhythmSpec, sample_rate: u32) -> Result<(AudioBuffer, BeatList)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_beats = (spec.n_bars * spec.beats_per_bar) as usize;

    // Beat times: intervals follow a linear tempo ramp over beat indices.
    let lead_in = spec.lead_in_beats * 60.0 / spec.tempo_start_bpm;
    let mut beat_times = Vec::with_capacity(n_beats + 1);
    let mut t = lead_in;
    for k in 0..=n_beats {
        beat_times.push(t);
        let frac = if n_beats > 1 {
            (k.min(n_beats - 1)) as f64 / (n_beats - 1) as f64
        } else {
            0.0
        };
        let bpm = spec.tempo_start_bpm + (spec.tempo_end_bpm - spec.tempo_start_bpm) * frac;
        t += 60.0 / bpm;
    }
    let last_beat = beat_times[n_beats - 1];
    let last_interval = beat_times[n_beats] - last_beat;
    let duration = last_beat + 0.45 * last_interval;
    let n_samples = (duration * sample_rate as f64).round() as usize;
    let mut samples = vec![0f32; n_samples];

    let tatums_per_bar = (spec.beats_per_bar * TATUMS_PER_BEAT) as usize;
    for (k, window) in beat_times.windows(2).take(n_beats).enumerate() {
        let (beat_t, next_t) = (window[0], window[1]);
        let beat_in_bar = k % spec.beats_per_bar as usize;
        for sub in 0..TATUMS_PER_BEAT as usize {
            let tatum_idx = (beat_in_bar * TATUMS_PER_BEAT as usize + sub) % tatums_per_bar;
            let tatum_t = beat_t + (next_t - beat_t) * sub as f64 / TATUMS_PER_BEAT as f64;
            for accent in &spec.accents[tatum_idx] {
                if rng.gen::<f64>() >= accent.probability {
                    continue;
                }
                let strength = if accent.strength_max > accent.strength_min {
                    rng.gen_range(accent.strength_min..accent.strength_max)
                } else {
                    accent.strength_min
                };
                let gain = match accent.band {
                    Band::Low => spec.band_gains.0,
                    Band::High => spec.band_gains.1,
                };
                let jitter = if spec.timing_jitter_s > 0.0 {
                    rng.gen_range(-2.0..2.0) * spec.timing_jitter_s
                } else {
                    0.0
                };
                render_stroke(
                    &mut samples,
                    sample_rate,
                    (tatum_t + jitter).max(0.0),
                    strength * gain,
                    accent.band,
                    &mut rng,
                );
            }
        }
    }

    if spec.ghost_rate_hz > 0.0 {
        let n_ghosts = (spec.ghost_rate_hz * duration).round() as usize;
        for _ in 0..n_ghosts {
            let t = rng.gen_range(0.0..duration);
            let strength = rng.gen_range(0.15..0.55) * spec.band_gains.0;
            render_stroke(&mut samples, sample_rate, t, strength, Band::Low, &mut rng);
        }
    }
    if spec.noise_floor > 0.0 {
        for s in &mut samples {
            *s += (spec.noise_floor * rng.gen_range(-1.0..1.0)) as f32;
        }
    }

    let peak = samples.iter().fold(0f32, |m, s| m.max(s.abs()));
    if peak > 0.99 {
        let scale = 0.99 / peak;
        for s in &mut samples {
            *s *= scale;
        }
    }

    let events = (0..n_beats)
        .map(|k| BeatEvent {
            time: beat_times[k],
            position: Some((k % spec.beats_per_bar as usize) as u32 + 1),
        })
        .collect();
    Ok((
        AudioBuffer::new(samples, sample_rate)?,
        BeatList::new(events, Some(spec.beats_per_bar))?,
    ))
}

fn render_stroke(
    samples: &mut [f32],
    sample_rate: u32,
    time: f64,
    strength: f64,
    band: Band,
    rng: &mut ChaCha8Rng,
) {
    let sr = sample_rate as f64;
    let start = (time * sr).round() as usize;
    match band {
        Band::Low => {
            let freq = rng.gen_range(80.0..180.0);
            let len = (0.12 * sr) as usize;
            let amp = 0.85 * strength;
            for i in 0..len {
                let idx = start + i;
                if idx >= samples.len() {
                    break;
                }
                let t = i as f64 / sr;
                let attack = (i as f64 / (0.002 * sr)).min(1.0);
                let v = amp * attack * (-t / 0.03).exp() * (std::f64::consts::TAU * freq * t).sin();
                samples[idx] += v as f32;
            }
        }
        Band::High => {
            let len = (0.04 * sr) as usize;
            let amp = 0.5 * strength;
            let mut prev = 0.0f64;
            for i in 0..len {
                let idx = start + i;
                if idx >= samples.len() {
                    break;
                }
                let t = i as f64 / sr;
                let white: f64 = rng.gen_range(-1.0..1.0);
                let hp = white - prev; // first difference tilts the spectrum up
                prev = white;
                samples[idx] += (amp * (-t / 0.008).exp() * hp) as f32;
            }
        }
    }
}

/// The three built-in suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuiteKind {
    CandombeLike,
    SambaLike,
    BallroomLike,
}

impl SuiteKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "candombe_like" => Ok(SuiteKind::CandombeLike),
            "samba_like" => Ok(SuiteKind::SambaLike),
            "ballroom_like" => Ok(SuiteKind::BallroomLike),
            other => Err(Error::Config(format!(
                "unknown suite {other:?}; expected candombe_like, samba_like or ballroom_like"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SuiteKind::CandombeLike => "candombe_like",
            SuiteKind::SambaLike => "samba_like",
            SuiteKind::BallroomLike => "ballroom_like",
        }
    }

    pub fn beats_per_bar(&self) -> u32 {
        match self {
            SuiteKind::SambaLike => 2,
            _ => 4,
        }
    }
}

fn low(p: f64, lo: f64, hi: f64) -> Accent {
    Accent::varied(p, lo, hi, Band::Low)
}

fn high(p: f64, lo: f64, hi: f64) -> Accent {
    Accent::varied(p, lo, hi, Band::High)
}

/// Accent table for one suite. Tatum indices are 0-based here; reports and
/// profiles use 1-based indices.
pub fn suite_accents(kind: SuiteKind) -> Vec<Vec<Accent>> {
    match kind {
        // 2/4, 8 tatums: deterministic low accent on beat 2 (tatum 5,
        // 1-based), a loud-but-variable downbeat, quiet tatums 2-3, fuzzy
        // elsewhere; a steady high-band timekeeper on every tatum.
        SuiteKind::SambaLike => {
            let mut t: Vec<Vec<Accent>> = vec![Vec::new(); 8];
            for slots in t.iter_mut() {
                slots.push(high(0.95, 0.5, 0.8));
            }
            t[0].push(low(1.0, 0.25, 1.0));
            t[4].push(low(1.0, 0.95, 1.0));
            for idx in [3, 5, 6, 7] {
                t[idx].push(low(0.5, 0.1, 0.9));
            }
            t
        }
        // 4/4, 16 tatums: strong low accents on beats 3 and 4 plus a
        // contrametric accent at tatum 4 (1-based), a high-variance
        // downbeat, several near-silent anchor tatums.
        SuiteKind::CandombeLike => {
            let mut t: Vec<Vec<Accent>> = vec![Vec::new(); 16];
            for slots in t.iter_mut() {
                slots.push(high(0.95, 0.5, 0.8));
            }
            t[8].push(low(1.0, 0.9, 1.0));
            t[12].push(low(1.0, 0.9, 1.0));
            t[3].push(low(1.0, 0.85, 1.0));
            t[0].push(low(0.55, 0.2, 1.0));
            for idx in [4, 5, 7, 9, 10, 11, 14] {
                t[idx].push(low(0.45, 0.1, 0.8));
            }
            t
        }
        // 4/4: clear beats in both bands, trendless off-tatums.
        SuiteKind::BallroomLike => {
            let mut t: Vec<Vec<Accent>> = vec![Vec::new(); 16];
            for (idx, slots) in t.iter_mut().enumerate() {
                if idx % 4 == 0 {
                    slots.push(low(1.0, 0.85, 1.0));
                    slots.push(high(1.0, 0.85, 1.0));
                } else {
                    slots.push(low(0.35, 0.05, 0.85));
                    slots.push(high(0.35, 0.05, 0.85));
                }
            }
            t
        }
    }
}

fn suite_tempo(kind: SuiteKind, rng: &mut ChaCha8Rng) -> (f64, f64) {
    match kind {
        SuiteKind::SambaLike => {
            let bpm = rng.gen_range(95.0..125.0);
            (bpm, bpm)
        }
        SuiteKind::CandombeLike => {
            let start = rng.gen_range(112.0..126.0);
            (start, start + rng.gen_range(5.0..12.0))
        }
        SuiteKind::BallroomLike => {
            let bpm = rng.gen_range(80.0..160.0);
            (bpm, bpm)
        }
    }
}

/// Generate a full 93-excerpt suite (30 s each) on disk: WAV + beats files
/// plus `manifest.json`. Deterministic per (kind, seed).
pub fn make_suite(kind: SuiteKind, out_dir: impl AsRef<Path>, seed: u64) -> Result<DatasetManifest> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir)
        .map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    let sample_rate = 44100;
    let beats_per_bar = kind.beats_per_bar();
    let mut entries = Vec::with_capacity(EXCERPT_CAP);
    for i in 0..EXCERPT_CAP {
        let excerpt_seed = seed
            .wrapping_mul(0x9E3779B97F4A7C15)
            .wrapping_add(i as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(excerpt_seed);
        let (start_bpm, end_bpm) = suite_tempo(kind, &mut rng);
        // enough bars to cover the excerpt window, trimmed below
        let mean_bpm = (start_bpm + end_bpm) / 2.0;
        let bar_seconds = beats_per_bar as f64 * 60.0 / mean_bpm;
        let n_bars = ((EXCERPT_SECONDS - 1.0) / bar_seconds).floor() as u32;
        // per-excerpt performance variation: fuzzy-accent probabilities
        // shift, the bands get their own gains
        let mut accents = suite_accents(kind);
        for slots in accents.iter_mut() {
            for a in slots.iter_mut() {
                if a.probability > 0.05 && a.probability < 0.95 {
                    a.probability = (a.probability + rng.gen_range(-0.25..0.25)).clamp(0.05, 0.95);
                }
            }
        }
        let spec = RhythmSpec {
            beats_per_bar,
            tempo_start_bpm: start_bpm,
            tempo_end_bpm: end_bpm,
            accents,
            n_bars,
            lead_in_beats: 0.55,
            timing_jitter_s: 0.003,
            ghost_rate_hz: 0.7,
            noise_floor: 0.012,
            band_gains: (rng.gen_range(0.7..1.0), rng.gen_range(0.5..1.0)),
            seed: excerpt_seed,
        };
        let (audio, ann) = generate(&spec, sample_rate)?;
        // pad with silence to exactly 30 s
        let want = (EXCERPT_SECONDS * sample_rate as f64) as usize;
        let mut samples = audio.samples;
        samples.resize(want, 0.0);
        let audio = AudioBuffer::new(samples, sample_rate)?;

        let id = format!("{}_{i:03}", kind.name());
        let wav_name = format!("{id}.wav");
        let beats_name = format!("{id}.beats");
        write_wav(out_dir.join(&wav_name), &audio)?;
        ann.write(out_dir.join(&beats_name))?;
        entries.push(ManifestEntry {
            id,
            audio: PathBuf::from(wav_name),
            annotations: PathBuf::from(beats_name),
        });
    }
    let manifest = DatasetManifest {
        dataset_name: kind.name().to_string(),
        meter: beats_per_bar,
        entries,
        base_dir: out_dir.to_path_buf(),
    };
    manifest.save(out_dir.join("manifest.json"))?;
    Ok(manifest)
}
