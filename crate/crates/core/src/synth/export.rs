use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{assign_labels, gen_corpus, rng_for, simulate_gaze, CorpusConfig, Lexicon, LexiconConfig, NoiseModel, ReadingConfig, UserProfile};
use crate::error::{invalid, CoreError, Result};
use crate::gaze::{read_stream, write_stream, GazeSample, Source};
use crate::text::{read_labels, write_labels, DocumentLayout, FrequencyTable, Label, LabelSet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub users: usize,
    pub lexicon: LexiconConfig,
    pub corpus: CorpusConfig,
    pub reading: ReadingConfig,
    /// Proficiency range as fractions of the lexicon size; each user draws
    /// a log-uniform rank threshold inside it.
    pub proficiency: (f64, f64),
    pub label_noise: f64,
    pub dwell_gain: f64,
    pub noise: Vec<NoiseModel>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            users: 8,
            lexicon: LexiconConfig::default(),
            corpus: CorpusConfig::default(),
            reading: ReadingConfig::default(),
            proficiency: (0.4, 0.88),
            label_noise: 0.015,
            dwell_gain: 3.0,
            noise: vec![NoiseModel::tracker(), NoiseModel::webcam()],
        }
    }
}

pub fn user_id(i: usize) -> String {
    format!("u{i}")
}

/// Everything the generator produces, in memory.
#[derive(Clone, Debug)]
pub struct SynthDataset {
    pub config: SynthConfig,
    pub layouts: Vec<DocumentLayout>,
    /// Population word frequencies (defines frequency ranks).
    pub population: FrequencyTable,
    pub users: Vec<UserProfile>,
    pub labels: Vec<Label>,
    /// Keyed by (user_id, doc_id, source).
    pub streams: BTreeMap<(String, String, Source), Vec<GazeSample>>,
}

impl SynthDataset {
    pub fn label_set(&self, user: &str, doc: &str) -> LabelSet {
        LabelSet::from_labels(user, doc, &self.labels)
    }

    pub fn layout(&self, doc: &str) -> Option<&DocumentLayout> {
        self.layouts.iter().find(|l| l.doc_id == doc)
    }

    pub fn stream(&self, user: &str, doc: &str, src: Source) -> Option<&[GazeSample]> {
        self.streams.get(&(user.to_string(), doc.to_string(), src)).map(Vec::as_slice)
    }

    /// Reads a directory written by [`export_dataset`].
    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: Manifest = serde_json::from_slice(&fs::read(dir.join("manifest.json"))?)?;
        let users: Vec<UserProfile> = serde_json::from_slice(&fs::read(dir.join("users.json"))?)?;
        let population: FrequencyTable = serde_json::from_slice(&fs::read(dir.join("frequency.json"))?)?;
        let mut layouts = Vec::new();
        for d in &manifest.docs {
            layouts.push(DocumentLayout::load(&dir.join(layout_path(d)))?);
        }
        let labels = read_labels(&dir.join("labels.jsonl"))?;
        let mut streams = BTreeMap::new();
        for u in &users {
            for d in &manifest.docs {
                for nm in &manifest.config.noise {
                    let p = dir.join(stream_path(&u.user_id, d, nm.kind));
                    streams.insert((u.user_id.clone(), d.clone(), nm.kind), read_stream(&p)?);
                }
            }
        }
        Ok(Self {
            config: manifest.config,
            layouts,
            population,
            users,
            labels,
            streams,
        })
    }
}

/// Runs the whole generator in memory.
pub fn generate(cfg: &SynthConfig) -> Result<SynthDataset> {
    let (lo, hi) = cfg.proficiency;
    if !(lo > 0.0 && hi >= lo) {
        return invalid("bad proficiency range");
    }
    if cfg.noise.windows(2).any(|w| w[0].kind == w[1].kind) {
        return invalid("duplicate noise kind");
    }
    let mut rng = rng_for(cfg.seed, &["lexicon"]);
    let lex = Lexicon::generate(&cfg.lexicon, &mut rng)?;
    let mut rng = rng_for(cfg.seed, &["corpus"]);
    let (layouts, population) = gen_corpus(&lex, &cfg.corpus, &mut rng)?;
    let ranks = population.ranks();
    let n = lex.len() as f64;
    let users: Vec<UserProfile> = (0..cfg.users)
        .map(|i| {
            let id = user_id(i);
            let mut r = rng_for(cfg.seed, &["user", &id]);
            let p = (lo * n).ln() + r.gen::<f64>() * ((hi * n).ln() - (lo * n).ln());
            UserProfile {
                user_id: id,
                proficiency: p.exp(),
                label_noise: cfg.label_noise,
                dwell_gain: cfg.dwell_gain,
            }
        })
        .collect();
    let mut labels = Vec::new();
    let mut streams = BTreeMap::new();
    for u in &users {
        for doc in &layouts {
            let ls = assign_labels(u, doc, &ranks, cfg.seed)?;
            let set = LabelSet::from_labels(&u.user_id, &doc.doc_id, &ls);
            for nm in &cfg.noise {
                let s = simulate_gaze(doc, &set, u, nm, &cfg.reading, cfg.seed)?;
                streams.insert((u.user_id.clone(), doc.doc_id.clone(), nm.kind), s);
            }
            labels.extend(ls);
        }
    }
    Ok(SynthDataset {
        config: cfg.clone(),
        layouts,
        population,
        users,
        labels,
        streams,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub users: usize,
    pub docs: usize,
    pub words: usize,
    pub labels: usize,
    pub unknown_labels: usize,
    pub streams: usize,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: SynthConfig,
    pub docs: Vec<String>,
    pub counts: Counts,
    /// Relative path → SHA-256 of the file contents.
    pub files: BTreeMap<String, String>,
    /// SHA-256 over the config and every file hash.
    pub hash: String,
}

fn layout_path(doc: &str) -> PathBuf {
    Path::new("layouts").join(format!("{doc}.json"))
}

fn stream_path(user: &str, doc: &str, src: Source) -> PathBuf {
    let kind = match src {
        Source::Tracker => "tracker",
        Source::Webcam => "webcam",
    };
    Path::new("streams").join(kind).join(format!("{user}_{doc}.jsonl"))
}

fn sha_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes layouts, labels, streams, user profiles, the population
/// frequency table and `manifest.json` under `out`.
pub fn export_dataset(ds: &SynthDataset, out: &Path) -> Result<Manifest> {
    let mkdir = |p: &Path| fs::create_dir_all(p).map_err(|e| CoreError::Invalid(format!("cannot create {}: {e}", p.display())));
    mkdir(out)?;
    mkdir(&out.join("layouts"))?;
    for nm in &ds.config.noise {
        mkdir(out.join(stream_path("x", "x", nm.kind)).parent().expect("has parent"))?;
    }
    let mut files = BTreeMap::new();
    let record = |rel: PathBuf, files: &mut BTreeMap<String, String>| -> Result<()> {
        let bytes = fs::read(out.join(&rel))?;
        files.insert(rel.to_string_lossy().replace('\\', "/"), sha_hex(&bytes));
        Ok(())
    };
    for l in &ds.layouts {
        l.save(&out.join(layout_path(&l.doc_id)))?;
        record(layout_path(&l.doc_id), &mut files)?;
    }
    write_labels(&out.join("labels.jsonl"), &ds.labels)?;
    record("labels.jsonl".into(), &mut files)?;
    fs::write(out.join("users.json"), serde_json::to_vec_pretty(&ds.users)?)?;
    record("users.json".into(), &mut files)?;
    fs::write(out.join("frequency.json"), serde_json::to_vec(&ds.population)?)?;
    record("frequency.json".into(), &mut files)?;
    let mut samples = 0;
    for ((u, d, src), s) in &ds.streams {
        let rel = stream_path(u, d, *src);
        write_stream(&out.join(&rel), s)?;
        record(rel, &mut files)?;
        samples += s.len();
    }
    let counts = Counts {
        users: ds.users.len(),
        docs: ds.layouts.len(),
        words: ds.layouts.iter().map(|l| l.words.len()).sum(),
        labels: ds.labels.len(),
        unknown_labels: ds.labels.iter().filter(|l| l.unknown).count(),
        streams: ds.streams.len(),
        samples,
    };
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(&ds.config)?);
    for (k, v) in &files {
        h.update(k.as_bytes());
        h.update(v.as_bytes());
    }
    let manifest = Manifest {
        config: ds.config.clone(),
        docs: ds.layouts.iter().map(|l| l.doc_id.clone()).collect(),
        counts,
        files,
        hash: hex::encode(h.finalize()),
    };
    fs::write(out.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}
