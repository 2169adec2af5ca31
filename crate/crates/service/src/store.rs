//! On-disk layout of dataset and checkpoint directories.
//!
//! A dataset directory holds `samples.jsonl` and `manifest.json` plus the
//! text resources it was built with (`vocab.json`, `frequency.json`,
//! `layouts/*.json`). A checkpoint directory holds `model.ckpt` next to
//! copies of the same vocabulary and frequency table.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use lexgaze_core::dataset::{Dataset, DatasetManifest};
use lexgaze_core::model::DetectorModel;
use lexgaze_core::session::Detector;
use lexgaze_core::text::{DocumentLayout, FrequencyTable, Vocabulary};

pub const MODEL_FILE: &str = "model.ckpt";
pub const VOCAB_FILE: &str = "vocab.json";
pub const FREQ_FILE: &str = "frequency.json";
pub const LAYOUT_DIR: &str = "layouts";

pub fn save_text(dir: &Path, vocab: &Vocabulary, freq: &FrequencyTable) -> Result<()> {
    fs::create_dir_all(dir)?;
    vocab.save(&dir.join(VOCAB_FILE))?;
    fs::write(dir.join(FREQ_FILE), serde_json::to_vec(freq)?)?;
    Ok(())
}

pub fn load_text(dir: &Path) -> Result<(Vocabulary, FrequencyTable)> {
    let vocab = Vocabulary::load(&dir.join(VOCAB_FILE)).with_context(|| format!("vocabulary in {}", dir.display()))?;
    let freq = serde_json::from_slice(&fs::read(dir.join(FREQ_FILE)).with_context(|| format!("frequency table in {}", dir.display()))?)?;
    Ok((vocab, freq))
}

pub fn save_layouts(dir: &Path, layouts: &[DocumentLayout]) -> Result<()> {
    let d = dir.join(LAYOUT_DIR);
    fs::create_dir_all(&d)?;
    for l in layouts {
        l.save(&d.join(format!("{}.json", l.doc_id)))?;
    }
    Ok(())
}

/// Every layout in `dir/layouts`, or in `dir` itself when it has no such
/// subdirectory, sorted by document id.
pub fn load_layouts(dir: &Path) -> Result<Vec<DocumentLayout>> {
    let sub = dir.join(LAYOUT_DIR);
    let d = if sub.is_dir() { sub } else { dir.to_path_buf() };
    let mut paths: Vec<PathBuf> = fs::read_dir(&d)
        .with_context(|| format!("listing {}", d.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for p in paths {
        out.push(DocumentLayout::load(&p).with_context(|| format!("layout {}", p.display()))?);
    }
    if out.is_empty() {
        bail!("no layouts in {}", d.display());
    }
    out.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    Ok(out)
}

pub struct DatasetDir {
    pub dataset: Dataset,
    pub manifest: DatasetManifest,
    pub vocab: Vocabulary,
    pub freq: FrequencyTable,
    pub layouts: Vec<DocumentLayout>,
}

pub fn load_dataset(dir: &Path) -> Result<DatasetDir> {
    let (dataset, manifest) = Dataset::load(dir).with_context(|| format!("dataset in {}", dir.display()))?;
    let (vocab, freq) = load_text(dir)?;
    if vocab.hash() != manifest.vocab_hash {
        bail!("{}: vocabulary does not match the one the samples were built with", dir.display());
    }
    let layouts = load_layouts(dir)?;
    Ok(DatasetDir {
        dataset,
        manifest,
        vocab,
        freq,
        layouts,
    })
}

pub fn save_checkpoint(dir: &Path, model: &DetectorModel, vocab: &Vocabulary, freq: &FrequencyTable) -> Result<()> {
    save_text(dir, vocab, freq)?;
    model.save(&dir.join(MODEL_FILE), &vocab.hash())?;
    Ok(())
}

pub fn load_checkpoint(dir: &Path) -> Result<Detector> {
    let (model, meta) =
        DetectorModel::load(&dir.join(MODEL_FILE)).with_context(|| format!("checkpoint in {}", dir.display()))?;
    let (vocab, freq) = load_text(dir)?;
    if vocab.hash() != meta.vocab_hash {
        bail!("{}: checkpoint was trained with a different vocabulary", dir.display());
    }
    Ok(Detector { model, vocab, freq })
}
