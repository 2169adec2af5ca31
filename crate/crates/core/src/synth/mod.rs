//! Synthetic reading data: a Zipf lexicon, two-column documents,
//! per-user unknown-word labels and gaze streams recorded through tracker-
//! or webcam-grade noise. Unknown words are read with longer fixations and
//! occasional regressions, which is the signal the detector has to find.

mod corpus;
mod export;
mod labels;
mod lexicon;
mod noise;
mod scanpath;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub use corpus::{doc_id, gen_corpus, population_table, render, CorpusConfig, PageStyle};
pub use export::{export_dataset, generate, Manifest, SynthConfig, SynthDataset};
pub use labels::{assign_labels, UserProfile};
pub use lexicon::{LexEntry, Lexicon, LexiconConfig};
pub use noise::NoiseModel;
pub use scanpath::{base_median_ms, plan_scanpath, Fixation, ReadingConfig, Scanpath};

use crate::error::Result;
use crate::gaze::GazeSample;
use crate::text::{DocumentLayout, LabelSet};

/// Child seed for the task named by `parts`.
pub fn derive_seed(seed: u64, parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for p in parts {
        h.update([0x1f]);
        h.update(p.as_bytes());
    }
    u64::from_le_bytes(h.finalize()[..8].try_into().expect("8 bytes"))
}

pub fn rng_for(seed: u64, parts: &[&str]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, parts))
}

/// Deterministic uniform draw in `[0, 1)`.
pub fn unit_hash(seed: u64, parts: &[&str]) -> f64 {
    (derive_seed(seed, parts) >> 11) as f64 / (1u64 << 53) as f64
}

/// Scanpath of `profile` reading `layout`.
pub fn reading_path(
    layout: &DocumentLayout,
    labels: &LabelSet,
    profile: &UserProfile,
    reading: &ReadingConfig,
    seed: u64,
) -> Result<Scanpath> {
    let unknown = (0..layout.words.len())
        .map(|i| {
            labels.get(i).ok_or_else(|| crate::CoreError::MissingLabel {
                user_id: profile.user_id.clone(),
                doc_id: layout.doc_id.clone(),
                word_index: i,
                text: layout.words[i].text.clone(),
            })
        })
        .collect::<Result<Vec<bool>>>()?;
    let mut rng = rng_for(seed, &["path", &profile.user_id, &layout.doc_id]);
    plan_scanpath(layout, &unknown, profile.dwell_gain, reading, &mut rng)
}

/// Gaze stream of `profile` reading `layout`, recorded through `noise`.
/// Both noise kinds see the same scanpath for a given seed.
pub fn simulate_gaze(
    layout: &DocumentLayout,
    labels: &LabelSet,
    profile: &UserProfile,
    noise: &NoiseModel,
    reading: &ReadingConfig,
    seed: u64,
) -> Result<Vec<GazeSample>> {
    let path = reading_path(layout, labels, profile, reading, seed)?;
    let kind = serde_json::to_string(&noise.kind)?;
    let mut rng = rng_for(seed, &["noise", &kind, &profile.user_id, &layout.doc_id]);
    noise.record(&path, &mut rng)
}
