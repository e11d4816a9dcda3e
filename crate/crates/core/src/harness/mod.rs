//! Experiment protocol: dataset manifests, 30-second excerpt segmentation,
//! seeded train/test splits, the nested subset ladder and snippet extraction.

mod matrix;

pub use matrix::{
    audit_plan, plan_matrix, run_matrix, run_strategy, CellPlan, CellResult, MatrixOutput,
    MatrixSpec, RunRecord, TrackEval,
};

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio::{read_wav, AudioBuffer};
use crate::beats::BeatList;
use crate::error::{Error, Result};

/// Excerpt length all datasets are segmented into.
pub const EXCERPT_SECONDS: f64 = 30.0;
/// Number of excerpts a larger dataset is sampled down to.
pub const EXCERPT_CAP: usize = 93;
/// Snippet length taken from the beginning of each training excerpt.
pub const SNIPPET_SECONDS: f64 = 10.0;
/// Fraction of excerpts assigned to the training split.
pub const TRAIN_FRACTION: f64 = 0.8;

/// One dataset entry: audio plus its annotation file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub audio: PathBuf,
    pub annotations: PathBuf,
}

/// Dataset description: `{dataset_name, meter, entries:[{id, audio, annotations}]}`.
/// Relative paths resolve against the manifest file's directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub dataset_name: String,
    /// Beats per bar of the tradition.
    pub meter: u32,
    pub entries: Vec<ManifestEntry>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let display = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(&display, e))?;
        let mut manifest: DatasetManifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: display.clone(),
            line: e.line(),
            message: e.to_string(),
        })?;
        manifest.base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        let mut seen = std::collections::HashSet::new();
        for entry in &manifest.entries {
            if !seen.insert(entry.id.clone()) {
                return Err(Error::InvalidInput(format!(
                    "duplicate track id {:?} in manifest",
                    entry.id
                )));
            }
            for p in [&entry.audio, &entry.annotations] {
                if !manifest.resolve(p).exists() {
                    return Err(Error::InvalidInput(format!(
                        "manifest path {} does not exist",
                        manifest.resolve(p).display()
                    )));
                }
            }
        }
        Ok(manifest)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let display = path.display().to_string();
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Other(format!("manifest serialization: {e}")))?;
        std::fs::write(path, text).map_err(|e| Error::io(&display, e))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

/// One 30-second excerpt with its (re-offset) annotations.
#[derive(Debug, Clone)]
pub struct Excerpt {
    pub id: String,
    pub audio: AudioBuffer,
    pub annotations: BeatList,
    pub beats_per_bar: u32,
}

/// Segmentation decision for one excerpt, made from headers and annotation
/// files only (no audio decode).
#[derive(Debug, Clone)]
pub struct CatalogItem {
    pub id: String,
    pub entry_idx: usize,
    pub segment: usize,
    pub annotations: BeatList,
}

fn wav_duration_seconds(path: &Path) -> Result<f64> {
    let reader = hound::WavReader::open(path).map_err(|e| Error::Wav {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(reader.duration() as f64 / reader.spec().sample_rate as f64)
}

/// Enumerate the dataset's excerpts: segment every recording into
/// non-overlapping 30-second windows, re-offset the annotations, drop
/// windows with fewer than two beats, and — when more than 93 remain —
/// take a seeded sample of 93.
pub fn excerpt_catalog(manifest: &DatasetManifest, seed: u64) -> Result<Vec<CatalogItem>> {
    let mut items = Vec::new();
    for (entry_idx, entry) in manifest.entries.iter().enumerate() {
        let duration = wav_duration_seconds(&manifest.resolve(&entry.audio))?;
        let annotations = BeatList::read(manifest.resolve(&entry.annotations))?;
        let n_segments = (duration / EXCERPT_SECONDS).floor() as usize;
        for k in 0..n_segments {
            let start = k as f64 * EXCERPT_SECONDS;
            let ann = annotations.window(start, start + EXCERPT_SECONDS);
            if ann.len() < 2 {
                continue;
            }
            let id = if n_segments == 1 {
                entry.id.clone()
            } else {
                format!("{}#{k}", entry.id)
            };
            items.push(CatalogItem {
                id,
                entry_idx,
                segment: k,
                annotations: ann,
            });
        }
    }
    if items.len() > EXCERPT_CAP {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x5eed));
        items.shuffle(&mut rng);
        items.truncate(EXCERPT_CAP);
        items.sort_by(|a, b| a.id.cmp(&b.id));
    }
    Ok(items)
}

/// Load the cataloged excerpts' audio (each source file decoded once).
pub fn load_dataset(manifest: &DatasetManifest, seed: u64) -> Result<Vec<Excerpt>> {
    let catalog = excerpt_catalog(manifest, seed)?;
    let mut by_entry: std::collections::BTreeMap<usize, Vec<&CatalogItem>> =
        std::collections::BTreeMap::new();
    for item in &catalog {
        by_entry.entry(item.entry_idx).or_default().push(item);
    }
    let mut excerpts: Vec<Excerpt> = Vec::with_capacity(catalog.len());
    for (entry_idx, items) in by_entry {
        let audio = read_wav(manifest.resolve(&manifest.entries[entry_idx].audio))?;
        for item in items {
            let start = item.segment as f64 * EXCERPT_SECONDS;
            excerpts.push(Excerpt {
                id: item.id.clone(),
                audio: audio.slice_seconds(start, EXCERPT_SECONDS),
                annotations: item.annotations.clone(),
                beats_per_bar: manifest.meter,
            });
        }
    }
    let order: std::collections::HashMap<&str, usize> = catalog
        .iter()
        .enumerate()
        .map(|(i, c)| (c.id.as_str(), i))
        .collect();
    excerpts.sort_by_key(|e| order[e.id.as_str()]);
    Ok(excerpts)
}

/// Seeded permutation of `0..n` split 80/20; the train side's order defines
/// the nested subset ladder.
pub fn split_order(n: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 5 {
        return Err(Error::InvalidInput(format!(
            "need at least 5 excerpts to split, got {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let n_train = (n as f64 * TRAIN_FRACTION).floor() as usize;
    let test = order.split_off(n_train);
    Ok((order, test))
}

/// Apply [`split_order`] to loaded excerpts (74 train / 19 test at 93).
pub fn split_train_test(
    excerpts: Vec<Excerpt>,
    seed: u64,
) -> Result<(Vec<Excerpt>, Vec<Excerpt>)> {
    let (train_idx, test_idx) = split_order(excerpts.len(), seed)?;
    let mut slots: Vec<Option<Excerpt>> = excerpts.into_iter().map(Some).collect();
    let take = |slots: &mut Vec<Option<Excerpt>>, idx: &[usize]| {
        idx.iter().map(|&i| slots[i].take().unwrap()).collect::<Vec<_>>()
    };
    let train = take(&mut slots, &train_idx);
    let test = take(&mut slots, &test_idx);
    Ok((train, test))
}

/// Requested amount of training data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SubsetSize {
    /// The first `n` excerpts of the seeded training order, 10-second
    /// snippets.
    Tracks(usize),
    /// Every training excerpt at full length.
    All,
}

impl SubsetSize {
    /// Annotated minutes for the results tables ("all" keeps its label).
    pub fn minutes_label(&self) -> String {
        match self {
            SubsetSize::Tracks(n) => format!("{:.2}", *n as f64 * SNIPPET_SECONDS / 60.0),
            SubsetSize::All => "all".to_string(),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        if s == "all" {
            Ok(SubsetSize::All)
        } else {
            s.parse::<usize>().map(SubsetSize::Tracks).map_err(|_| {
                Error::Config(format!("subset must be a track count or \"all\", got {s:?}"))
            })
        }
    }
}

/// The published subset ladder.
pub const SUBSET_LADDER: [usize; 6] = [4, 9, 18, 37, 55, 74];

/// One training snippet with provenance.
#[derive(Debug, Clone)]
pub struct Snippet {
    pub source_track_id: String,
    pub audio: AudioBuffer,
    pub annotations: BeatList,
    pub beats_per_bar: u32,
}

/// Snippets for one subset: `train` and `val` sides.
#[derive(Debug, Clone)]
pub struct SnippetSet {
    pub train: Vec<Snippet>,
    pub val: Vec<Snippet>,
}

/// How snippet windows are assigned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnippetMode {
    /// First 5 s to train, the adjacent next 5 s to validation.
    SplitHalves,
    /// The whole 10 s window to train (validation side empty).
    WholeWindow,
}

/// Cut training snippets for a subset.
///
/// `Tracks(n)` takes the first `n` excerpts of the given training order and
/// the first 10 s of each; `All` uses every excerpt at full length with a
/// 75/25 train/validation split (`WholeWindow` keeps everything in train).
pub fn make_snippets(
    train_excerpts: &[Excerpt],
    size: SubsetSize,
    mode: SnippetMode,
) -> Result<SnippetSet> {
    match size {
        SubsetSize::Tracks(n) => {
            if n == 0 || n > train_excerpts.len() {
                return Err(Error::InvalidInput(format!(
                    "subset of {n} tracks from {} available",
                    train_excerpts.len()
                )));
            }
            let half = SNIPPET_SECONDS / 2.0;
            let mut set = SnippetSet {
                train: Vec::new(),
                val: Vec::new(),
            };
            for excerpt in &train_excerpts[..n] {
                if excerpt.audio.duration_seconds() < SNIPPET_SECONDS {
                    return Err(Error::InputTooShort(format!(
                        "excerpt {} is shorter than the {SNIPPET_SECONDS} s snippet window",
                        excerpt.id
                    )));
                }
                match mode {
                    SnippetMode::SplitHalves => {
                        set.train.push(Snippet {
                            source_track_id: excerpt.id.clone(),
                            audio: excerpt.audio.slice_seconds(0.0, half),
                            annotations: excerpt.annotations.window(0.0, half),
                            beats_per_bar: excerpt.beats_per_bar,
                        });
                        set.val.push(Snippet {
                            source_track_id: excerpt.id.clone(),
                            audio: excerpt.audio.slice_seconds(half, half),
                            annotations: excerpt.annotations.window(half, SNIPPET_SECONDS),
                            beats_per_bar: excerpt.beats_per_bar,
                        });
                    }
                    SnippetMode::WholeWindow => set.train.push(Snippet {
                        source_track_id: excerpt.id.clone(),
                        audio: excerpt.audio.slice_seconds(0.0, SNIPPET_SECONDS),
                        annotations: excerpt.annotations.window(0.0, SNIPPET_SECONDS),
                        beats_per_bar: excerpt.beats_per_bar,
                    }),
                }
            }
            Ok(set)
        }
        SubsetSize::All => {
            let mut set = SnippetSet {
                train: Vec::new(),
                val: Vec::new(),
            };
            let n_train = match mode {
                SnippetMode::SplitHalves => {
                    (train_excerpts.len() as f64 * 0.75).floor() as usize
                }
                SnippetMode::WholeWindow => train_excerpts.len(),
            };
            for (i, excerpt) in train_excerpts.iter().enumerate() {
                let snippet = Snippet {
                    source_track_id: excerpt.id.clone(),
                    audio: excerpt.audio.clone(),
                    annotations: excerpt.annotations.clone(),
                    beats_per_bar: excerpt.beats_per_bar,
                };
                if i < n_train {
                    set.train.push(snippet);
                } else {
                    set.val.push(snippet);
                }
            }
            Ok(set)
        }
    }
}

#[cfg(test)]
mod tests;
