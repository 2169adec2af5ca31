//! Labeled samples from (stream, layout, labels) triples and the
//! train/dev/test splits of the three evaluation regimes.

mod features;
mod split;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use features::{
    denoised_windows, gaze_channels, screen_diagonal, window_features, CandidateWord, TextContext, WindowFeatures,
    CHANNEL_SMOOTHING, WINDOW_MS,
};
pub use split::{split, Split, SplitManifest, SplitMode, SplitSpec};

use crate::error::{CoreError, Result};
use crate::gaze::{GazeSample, Source};
use crate::model::{ModelConfig, ModelRow};
use crate::text::{DocumentLayout, LabelSet};

/// One candidate word of one accepted window, with its label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    #[serde(flatten)]
    pub word: CandidateWord,
    pub unknown: bool,
}

/// All samples of one accepted window plus the model rows they index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowExample {
    pub user_id: String,
    pub doc_id: String,
    pub window_index: usize,
    pub source: Source,
    pub rows: Vec<ModelRow>,
    pub samples: Vec<LabeledSample>,
}

impl WindowExample {
    /// Per-row token labels and loss mask: tokens of candidate words carry
    /// their word's label, context tokens are masked out.
    pub fn token_targets(&self) -> Vec<(Vec<f64>, Vec<bool>)> {
        let mut out: Vec<(Vec<f64>, Vec<bool>)> =
            self.rows.iter().map(|r| (vec![0.0; r.tokens.len()], vec![false; r.tokens.len()])).collect();
        for s in &self.samples {
            let (y, m) = &mut out[s.word.row];
            for &t in &s.word.tokens {
                y[t] = if s.unknown { 1.0 } else { 0.0 };
                m[t] = true;
            }
        }
        out
    }
}

/// Per-window accounting of a build.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildStats {
    pub windows: usize,
    pub accepted: usize,
    pub rejected_unstable: usize,
    pub rejected_empty: usize,
    pub without_candidates: usize,
}

impl std::ops::AddAssign for BuildStats {
    fn add_assign(&mut self, o: Self) {
        self.windows += o.windows;
        self.accepted += o.accepted;
        self.rejected_unstable += o.rejected_unstable;
        self.rejected_empty += o.rejected_empty;
        self.without_candidates += o.without_candidates;
    }
}

/// Segment → denoise → region of interest → candidates → features →
/// labels. Rejected windows and windows without candidates yield nothing.
pub fn build_samples(
    stream: &[GazeSample],
    layout: &DocumentLayout,
    labels: &LabelSet,
    text: TextContext<'_>,
    cfg: &ModelConfig,
) -> Result<(Vec<WindowExample>, BuildStats)> {
    use crate::gaze::WindowStatus;
    let source = stream.first().map_or(Source::Tracker, |s| s.src);
    let mut stats = BuildStats::default();
    let mut out = Vec::new();
    for w in denoised_windows(stream, layout.line_height)? {
        stats.windows += 1;
        match w.status {
            WindowStatus::RejectedUnstable => {
                stats.rejected_unstable += 1;
                continue;
            }
            WindowStatus::RejectedEmpty => {
                stats.rejected_empty += 1;
                continue;
            }
            WindowStatus::Accepted => stats.accepted += 1,
        }
        let Some(f) = window_features(&w, layout, text, cfg)? else {
            stats.without_candidates += 1;
            continue;
        };
        let samples = f
            .words
            .into_iter()
            .map(|word| {
                let unknown = labels.get(word.word_index).ok_or_else(|| CoreError::MissingLabel {
                    user_id: labels.user_id.clone(),
                    doc_id: layout.doc_id.clone(),
                    word_index: word.word_index,
                    text: word.text.clone(),
                })?;
                Ok(LabeledSample { word, unknown })
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(WindowExample {
            user_id: labels.user_id.clone(),
            doc_id: layout.doc_id.clone(),
            window_index: w.index,
            source,
            rows: f.rows,
            samples,
        });
    }
    Ok((out, stats))
}

/// Negative:positive ratio over the loss-bearing (candidate) tokens.
/// Without positives the ratio is infinite.
pub fn class_imbalance(windows: &[WindowExample]) -> f64 {
    let (mut pos, mut neg) = (0usize, 0usize);
    for s in windows.iter().flat_map(|w| &w.samples) {
        if s.unknown {
            pos += s.word.tokens.len();
        } else {
            neg += s.word.tokens.len();
        }
    }
    if pos == 0 {
        log::warn!("class_imbalance: no positive tokens");
        return f64::INFINITY;
    }
    neg as f64 / pos as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub source: Source,
    pub windows: usize,
    pub samples: usize,
    pub positives: usize,
    pub tokens: usize,
    /// Serialized as `null` when there are no positives.
    pub imbalance: Option<f64>,
    pub vocab_hash: String,
    pub stats: BuildStats,
    pub model: ModelConfig,
    pub splits: BTreeMap<String, SplitManifest>,
    /// SHA-256 of the samples file.
    pub hash: String,
}

/// Built windows with their provenance.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub windows: Vec<WindowExample>,
    pub stats: BuildStats,
    pub vocab_hash: String,
    pub model: ModelConfig,
}

impl Dataset {
    pub fn n_samples(&self) -> usize {
        self.windows.iter().map(|w| w.samples.len()).sum()
    }

    /// Writes `samples.jsonl` (one window with its samples per line) and
    /// `manifest.json` including the manifests of `splits`.
    pub fn save(&self, dir: &Path, splits: &[SplitSpec]) -> Result<DatasetManifest> {
        fs::create_dir_all(dir)?;
        let path = dir.join("samples.jsonl");
        let mut w = BufWriter::new(File::create(&path)?);
        for ex in &self.windows {
            serde_json::to_writer(&mut w, ex)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        drop(w);
        let hash = hex::encode(Sha256::digest(fs::read(&path)?));
        let mut split_manifests = BTreeMap::new();
        for spec in splits {
            let s = split(&self.windows, spec)?;
            split_manifests.insert(spec.mode.name().to_string(), s.manifest);
        }
        let imb = class_imbalance(&self.windows);
        let m = DatasetManifest {
            source: self.windows.first().map_or(Source::Tracker, |w| w.source),
            windows: self.windows.len(),
            samples: self.n_samples(),
            positives: self.windows.iter().flat_map(|w| &w.samples).filter(|s| s.unknown).count(),
            tokens: self.windows.iter().flat_map(|w| &w.samples).map(|s| s.word.tokens.len()).sum(),
            imbalance: imb.is_finite().then_some(imb),
            vocab_hash: self.vocab_hash.clone(),
            stats: self.stats,
            model: self.model.clone(),
            splits: split_manifests,
            hash,
        };
        fs::write(dir.join("manifest.json"), serde_json::to_vec_pretty(&m)?)?;
        Ok(m)
    }

    pub fn load(dir: &Path) -> Result<(Self, DatasetManifest)> {
        let m: DatasetManifest = serde_json::from_slice(&fs::read(dir.join("manifest.json"))?)?;
        let path = dir.join("samples.jsonl");
        let mut windows = Vec::with_capacity(m.windows);
        for (i, line) in BufReader::new(File::open(&path)?).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            windows.push(serde_json::from_str(&line).map_err(|e| CoreError::Parse {
                path: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })?);
        }
        Ok((
            Self {
                windows,
                stats: m.stats,
                vocab_hash: m.vocab_hash.clone(),
                model: m.model.clone(),
            },
            m,
        ))
    }
}

/// Vocabulary and corpus frequency table shared by every build over the
/// same documents.
pub fn text_resources(layouts: &[DocumentLayout]) -> Result<(crate::text::Vocabulary, crate::text::FrequencyTable)> {
    let vocab = crate::text::build_vocabulary(layouts, &crate::text::VocabConfig::default())?;
    Ok((vocab, crate::text::FrequencyTable::from_layouts(layouts)))
}

/// Builds the dataset of every (user, document) reading of `ds` recorded
/// with `source` noise.
pub fn from_synth(
    ds: &crate::synth::SynthDataset,
    source: Source,
    text: TextContext<'_>,
    cfg: &ModelConfig,
) -> Result<Dataset> {
    let mut windows = Vec::new();
    let mut stats = BuildStats::default();
    for u in &ds.users {
        for layout in &ds.layouts {
            let stream = ds
                .stream(&u.user_id, &layout.doc_id, source)
                .ok_or_else(|| CoreError::Invalid(format!("no {source:?} stream for {} / {}", u.user_id, layout.doc_id)))?;
            let labels = ds.label_set(&u.user_id, &layout.doc_id);
            let (w, s) = build_samples(stream, layout, &labels, text, cfg)?;
            windows.extend(w);
            stats += s;
        }
    }
    Ok(Dataset {
        windows,
        stats,
        vocab_hash: text.vocab.hash(),
        model: cfg.clone(),
    })
}
