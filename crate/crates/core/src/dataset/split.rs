use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::WindowExample;
use crate::error::{invalid, CoreError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    Mixed,
    CrossUser,
    CrossDocument,
}

impl SplitMode {
    pub const ALL: [SplitMode; 3] = [SplitMode::Mixed, SplitMode::CrossUser, SplitMode::CrossDocument];

    pub fn name(self) -> &'static str {
        match self {
            SplitMode::Mixed => "mixed",
            SplitMode::CrossUser => "cross_user",
            SplitMode::CrossDocument => "cross_document",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| CoreError::Invalid(format!("unknown split mode `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub mode: SplitMode,
    /// train:dev:test proportions for the mixed mode.
    pub ratios: (u32, u32, u32),
    /// Held-out user or document ids; chosen from the seed when empty.
    pub dev_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(mode: SplitMode, seed: u64) -> Self {
        Self {
            mode,
            ratios: (8, 1, 1),
            dev_ids: Vec::new(),
            test_ids: Vec::new(),
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartCounts {
    pub windows: usize,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub mode: SplitMode,
    pub seed: u64,
    pub dev_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub train: PartCounts,
    pub dev: PartCounts,
    pub test: PartCounts,
}

/// Window indices per part.
#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub train: Vec<usize>,
    pub dev: Vec<usize>,
    pub test: Vec<usize>,
    pub manifest: SplitManifest,
}

/// Partitions whole windows, so every sample lands in exactly one part and
/// the samples of one window never straddle parts. The mixed mode shuffles
/// windows with the seed and cuts by ratio; the cross modes hold out users
/// or documents.
pub fn split(windows: &[WindowExample], spec: &SplitSpec) -> Result<Split> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (train, dev, test, dev_ids, test_ids) = match spec.mode {
        SplitMode::Mixed => {
            let (a, b, c) = spec.ratios;
            let total = (a + b + c) as usize;
            if total == 0 || a == 0 {
                return invalid("mixed split needs a nonzero train ratio");
            }
            let mut idx: Vec<usize> = (0..windows.len()).collect();
            idx.shuffle(&mut rng);
            let n = idx.len();
            let n_dev = n * b as usize / total;
            let n_test = n * c as usize / total;
            let n_train = n - n_dev - n_test;
            let mut train = idx[..n_train].to_vec();
            let mut dev = idx[n_train..n_train + n_dev].to_vec();
            let mut test = idx[n_train + n_dev..].to_vec();
            train.sort_unstable();
            dev.sort_unstable();
            test.sort_unstable();
            (train, dev, test, Vec::new(), Vec::new())
        }
        SplitMode::CrossUser | SplitMode::CrossDocument => {
            let key = |w: &WindowExample| -> String {
                if spec.mode == SplitMode::CrossUser {
                    w.user_id.clone()
                } else {
                    w.doc_id.clone()
                }
            };
            let (dev_ids, test_ids) = if spec.dev_ids.is_empty() && spec.test_ids.is_empty() {
                let mut ids: Vec<String> = windows.iter().map(key).collect::<BTreeSet<_>>().into_iter().collect();
                ids.shuffle(&mut rng);
                let k = ids.len().div_ceil(10).max(1);
                let test: Vec<String> = ids.iter().take(k).cloned().collect();
                let dev: Vec<String> = ids.iter().skip(k).take(k).cloned().collect();
                (dev, test)
            } else {
                (spec.dev_ids.clone(), spec.test_ids.clone())
            };
            if dev_ids.iter().any(|d| test_ids.contains(d)) {
                return invalid("dev and test ids overlap");
            }
            let (mut train, mut dev, mut test) = (Vec::new(), Vec::new(), Vec::new());
            for (i, w) in windows.iter().enumerate() {
                let k = key(w);
                if test_ids.contains(&k) {
                    test.push(i);
                } else if dev_ids.contains(&k) {
                    dev.push(i);
                } else {
                    train.push(i);
                }
            }
            (train, dev, test, dev_ids, test_ids)
        }
    };
    if spec.mode != SplitMode::Mixed && (train.is_empty() || dev.is_empty() || test.is_empty()) {
        return invalid(format!(
            "{} split leaves an empty part ({} / {} / {} windows)",
            spec.mode.name(),
            train.len(),
            dev.len(),
            test.len()
        ));
    }
    let counts = |part: &[usize]| PartCounts {
        windows: part.len(),
        samples: part.iter().map(|&i| windows[i].samples.len()).sum(),
    };
    let manifest = SplitManifest {
        mode: spec.mode,
        seed: spec.seed,
        dev_ids,
        test_ids,
        train: counts(&train),
        dev: counts(&dev),
        test: counts(&test),
    };
    Ok(Split {
        train,
        dev,
        test,
        manifest,
    })
}
