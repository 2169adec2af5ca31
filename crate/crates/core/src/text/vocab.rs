use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::layout::{core_of, DocumentLayout, LayoutWord};
use crate::error::{invalid, CoreError, Result};
use crate::geometry::BoundingBox;

pub const VOCAB_VERSION: u32 = 1;
pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
pub const MIN_VOCAB_SIZE: usize = 16;

/// Ordered token units: specials, character-bigram fallback units, then
/// whole words.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Vocabulary {
    pub version: u32,
    units: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.version == other.version && self.units == other.units
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VocabConfig {
    pub max_size: usize,
    /// Whole words need at least this many occurrences.
    pub min_count: usize,
}

impl Default for VocabConfig {
    fn default() -> Self {
        Self {
            max_size: 8000,
            min_count: 1,
        }
    }
}

/// Splits a word into (leading punctuation, core, trailing punctuation)
/// character ranges.
fn segments(text: &str) -> (Vec<String>, String, Vec<String>) {
    let core = core_of(text);
    if core.is_empty() {
        return (text.chars().map(String::from).collect(), String::new(), Vec::new());
    }
    let start = text.find(core).expect("core is a substring");
    let lead = text[..start].chars().map(String::from).collect();
    let trail = text[start + core.len()..].chars().map(String::from).collect();
    (lead, core.to_string(), trail)
}

/// Two-character chunks from the start of the word (last may be one char).
fn chunks(core: &str) -> Vec<String> {
    let cs: Vec<char> = core.chars().collect();
    cs.chunks(2).map(|c| c.iter().collect()).collect()
}

fn rank(counts: BTreeMap<String, usize>) -> Vec<(String, usize)> {
    let mut v: Vec<_> = counts.into_iter().collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v
}

pub fn build_vocabulary(corpus: &[DocumentLayout], cfg: &VocabConfig) -> Result<Vocabulary> {
    if cfg.max_size < MIN_VOCAB_SIZE {
        return invalid(format!("vocabulary size must be at least {MIN_VOCAB_SIZE}, got {}", cfg.max_size));
    }
    if corpus.iter().all(|d| d.words.is_empty()) {
        return Err(CoreError::Empty("corpus"));
    }
    let mut words: BTreeMap<String, usize> = BTreeMap::new();
    let mut pieces: BTreeMap<String, usize> = BTreeMap::new();
    for w in corpus.iter().flat_map(|d| &d.words) {
        let (lead, core, trail) = segments(&w.text);
        let lower = core.to_lowercase();
        for p in lead.into_iter().chain(trail).chain(chunks(&lower)) {
            *pieces.entry(p).or_default() += 1;
        }
        if !lower.is_empty() {
            *words.entry(lower).or_default() += 1;
        }
    }
    let mut units = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
    let mut index: HashMap<String, u32> = units.iter().enumerate().map(|(i, u)| (u.clone(), i as u32)).collect();
    let mut push = |u: String, units: &mut Vec<String>| {
        if units.len() < cfg.max_size && !index.contains_key(&u) {
            index.insert(u.clone(), units.len() as u32);
            units.push(u);
        }
    };
    for (p, _) in rank(pieces) {
        push(p, &mut units);
    }
    for (w, c) in rank(words) {
        if c >= cfg.min_count {
            push(w, &mut units);
        }
    }
    Ok(Vocabulary::from_units(units))
}

impl Vocabulary {
    fn from_units(units: Vec<String>) -> Self {
        let index = units.iter().enumerate().map(|(i, u)| (u.clone(), i as u32)).collect();
        Self {
            version: VOCAB_VERSION,
            units,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn id(&self, unit: &str) -> Option<u32> {
        self.index.get(unit).copied()
    }

    pub fn unit(&self, id: u32) -> Option<&str> {
        self.units.get(id as usize).map(String::as_str)
    }

    pub fn units(&self) -> &[String] {
        &self.units
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        Ok(serde_json::to_vec(self)?)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let v: Vocabulary = serde_json::from_slice(bytes)?;
        if v.version != VOCAB_VERSION {
            return invalid(format!("unsupported vocabulary version {}", v.version));
        }
        if v.units.len() < 2 || v.units[0] != PAD_TOKEN || v.units[1] != UNK_TOKEN {
            return invalid("vocabulary must start with <pad>, <unk>");
        }
        Ok(Self::from_units(v.units))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read(path)?)
    }

    /// SHA-256 of the serialized vocabulary, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().expect("vocabulary serializes")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TokenSpan {
    pub token_id: u32,
    pub text: String,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
}

/// Splits a word into vocabulary units: the whole (lowercased) word when
/// known, otherwise two-character chunks; surrounding punctuation becomes
/// one unit per character. Token boxes divide the word box in proportion
/// to their character counts.
pub fn tokenize(word: &LayoutWord, vocab: &Vocabulary) -> Result<Vec<TokenSpan>> {
    if word.text.is_empty() {
        return Err(CoreError::Empty("word"));
    }
    let (lead, core, trail) = segments(&word.text);
    let mut parts: Vec<(String, u32)> = Vec::new();
    let lookup = |u: &str| vocab.id(&u.to_lowercase()).unwrap_or(UNK);
    for p in lead {
        let id = lookup(&p);
        parts.push((p, id));
    }
    if !core.is_empty() {
        match vocab.id(&core.to_lowercase()) {
            Some(id) => parts.push((core, id)),
            None => {
                for c in chunks(&core) {
                    let id = lookup(&c);
                    parts.push((c, id));
                }
            }
        }
    }
    for p in trail {
        let id = lookup(&p);
        parts.push((p, id));
    }
    let total = word.text.chars().count() as f64;
    let b = word.bbox;
    let mut done = 0usize;
    let n = parts.len();
    Ok(parts
        .into_iter()
        .enumerate()
        .map(|(i, (text, token_id))| {
            let len = text.chars().count();
            let x0 = b.x_min + b.width() * done as f64 / total;
            done += len;
            let x1 = if i + 1 == n { b.x_max } else { b.x_min + b.width() * done as f64 / total };
            TokenSpan {
                token_id,
                text,
                bbox: BoundingBox {
                    x_min: x0,
                    x_max: x1,
                    ..b
                },
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::layout::DocumentLayout;

    fn doc(words: &[&str]) -> DocumentLayout {
        DocumentLayout {
            doc_id: "d".into(),
            line_height: 20.0,
            words: words
                .iter()
                .enumerate()
                .map(|(i, t)| LayoutWord {
                    text: t.to_string(),
                    bbox: BoundingBox::new(i as f64 * 100.0, 0.0, i as f64 * 100.0 + 80.0, 16.0),
                    line_index: 0,
                })
                .collect(),
            columns: vec![],
        }
    }

    fn word(t: &str) -> LayoutWord {
        LayoutWord {
            text: t.into(),
            bbox: BoundingBox::new(0.0, 0.0, 80.0, 16.0),
            line_index: 0,
        }
    }

    #[test]
    fn small_corpus() {
        let v = build_vocabulary(&[doc(&["the", "the", "cat"])], &VocabConfig { max_size: 16, min_count: 1 }).unwrap();
        assert!(v.id("the").is_some() && v.id("cat").is_some());
        assert_eq!(v.id("<pad>"), Some(PAD));
        assert_eq!(v.id("<unk>"), Some(UNK));
        assert!(v.len() <= 16);
        assert!(build_vocabulary(&[doc(&["a"])], &VocabConfig { max_size: 15, min_count: 1 }).is_err());
    }

    #[test]
    fn unseen_word_uses_bigrams() {
        let v = build_vocabulary(&[doc(&["cattle", "hat"])], &VocabConfig { max_size: 100, min_count: 5 }).unwrap();
        let t = tokenize(&word("hatt"), &v).unwrap();
        assert_eq!(t.iter().map(|t| t.text.as_str()).collect::<Vec<_>>(), vec!["ha", "tt"]);
        assert!(t.iter().all(|t| t.token_id != UNK));
        let t = tokenize(&word("qq"), &v).unwrap();
        assert_eq!(t[0].token_id, UNK);
    }

    #[test]
    fn proportional_boxes() {
        let v = build_vocabulary(&[doc(&["abcdefgh"])], &VocabConfig { max_size: 100, min_count: 5 }).unwrap();
        let t = tokenize(&word("abcdefgh"), &v).unwrap();
        assert_eq!(t.len(), 4);
        for (i, s) in t.iter().enumerate() {
            assert!((s.bbox.width() - 20.0).abs() < 1e-12);
            assert!((s.bbox.x_min - 20.0 * i as f64).abs() < 1e-12);
        }
        assert_eq!(t.last().unwrap().bbox.x_max, 80.0);
    }

    #[test]
    fn punctuation_is_split_and_round_trips() {
        let v = build_vocabulary(&[doc(&["end.", "(end)"])], &VocabConfig { max_size: 100, min_count: 1 }).unwrap();
        let t = tokenize(&word("(End)."), &v).unwrap();
        assert_eq!(t.iter().map(|t| t.text.as_str()).collect::<String>(), "(End).");
        assert_eq!(t[1].text, "End");
        assert_eq!(t[1].token_id, v.id("end").unwrap());
    }

    #[test]
    fn rebuild_is_byte_identical() {
        let c = [doc(&["one", "two", "two", "three"]), doc(&["four", "one"])];
        let cfg = VocabConfig { max_size: 50, min_count: 1 };
        let a = build_vocabulary(&c, &cfg).unwrap();
        let b = build_vocabulary(&c, &cfg).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert_eq!(Vocabulary::from_json(&a.to_json().unwrap()).unwrap(), a);
    }
}
