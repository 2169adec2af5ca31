use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::layout::{core_of, DocumentLayout, LayoutWord};
use super::lexicon;

pub const TF_BINS: usize = 16;

/// Universal part-of-speech tag set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PosTag {
    Noun,
    Verb,
    Adj,
    Adv,
    Pron,
    Det,
    Adp,
    Num,
    Conj,
    Prt,
    Punct,
    X,
}

impl PosTag {
    pub const COUNT: usize = 12;
    pub const ALL: [PosTag; 12] = [
        PosTag::Noun,
        PosTag::Verb,
        PosTag::Adj,
        PosTag::Adv,
        PosTag::Pron,
        PosTag::Det,
        PosTag::Adp,
        PosTag::Num,
        PosTag::Conj,
        PosTag::Prt,
        PosTag::Punct,
        PosTag::X,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NerTag {
    None,
    Person,
    Place,
    Org,
    Other,
}

impl NerTag {
    pub const COUNT: usize = 5;

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Word counts of a reference corpus (lowercased word cores).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FrequencyTable {
    pub counts: BTreeMap<String, u64>,
}

impl FrequencyTable {
    pub fn from_counts(counts: BTreeMap<String, u64>) -> Self {
        Self { counts }
    }

    pub fn from_layouts<'a>(docs: impl IntoIterator<Item = &'a DocumentLayout>) -> Self {
        let mut counts = BTreeMap::new();
        for w in docs.into_iter().flat_map(|d| &d.words) {
            let n = w.normalized();
            if !n.is_empty() {
                *counts.entry(n).or_insert(0) += 1;
            }
        }
        Self { counts }
    }

    pub fn count(&self, normalized: &str) -> u64 {
        self.counts.get(normalized).copied().unwrap_or(0)
    }

    /// 1-based ranks by descending count, ties broken alphabetically.
    pub fn ranks(&self) -> HashMap<String, usize> {
        let mut v: Vec<(&String, u64)> = self.counts.iter().map(|(w, c)| (w, *c)).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        v.into_iter().enumerate().map(|(i, (w, _))| (w.clone(), i + 1)).collect()
    }

    pub fn max_count(&self) -> u64 {
        self.counts.values().copied().max().unwrap_or(0)
    }

    /// `ln(count + 1)`.
    pub fn log_tf(&self, normalized: &str) -> f64 {
        (self.count(normalized) as f64).ln_1p()
    }

    /// Log frequency scaled onto `0..TF_BINS` relative to the most frequent
    /// word; unseen words fall in bin 0.
    pub fn tf_bin(&self, log_tf: f64) -> usize {
        let top = (self.max_count() as f64).ln_1p();
        if top <= 0.0 {
            return 0;
        }
        (((TF_BINS - 1) as f64 * log_tf / top).floor().max(0.0) as usize).min(TF_BINS - 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeVector {
    pub log_term_frequency: f64,
    pub tf_bin: usize,
    pub pos_tag: PosTag,
    pub ner_tag: NerTag,
}

const SUFFIXES: &[(&str, PosTag)] = &[
    ("ly", PosTag::Adv),
    ("tion", PosTag::Noun),
    ("sion", PosTag::Noun),
    ("ment", PosTag::Noun),
    ("ness", PosTag::Noun),
    ("ship", PosTag::Noun),
    ("hood", PosTag::Noun),
    ("ity", PosTag::Noun),
    ("ism", PosTag::Noun),
    ("ist", PosTag::Noun),
    ("ance", PosTag::Noun),
    ("ence", PosTag::Noun),
    ("ous", PosTag::Adj),
    ("ful", PosTag::Adj),
    ("ive", PosTag::Adj),
    ("able", PosTag::Adj),
    ("ible", PosTag::Adj),
    ("less", PosTag::Adj),
    ("ish", PosTag::Adj),
    ("ary", PosTag::Adj),
    ("al", PosTag::Adj),
    ("ic", PosTag::Adj),
    ("ize", PosTag::Verb),
    ("ise", PosTag::Verb),
    ("ify", PosTag::Verb),
    ("ate", PosTag::Verb),
    ("ing", PosTag::Verb),
    ("ed", PosTag::Verb),
    ("en", PosTag::Verb),
];

fn is_capitalized(core: &str) -> bool {
    core.chars().next().is_some_and(char::is_uppercase)
}

/// Lexicon lookup for function words, then shape and suffix rules.
pub fn pos_tag(text: &str, sentence_initial: bool) -> PosTag {
    let core = core_of(text);
    if core.is_empty() {
        return PosTag::Punct;
    }
    let lower = core.to_lowercase();
    if let Some(t) = lexicon::function_word_tag(&lower) {
        return t;
    }
    let digits = core.chars().filter(char::is_ascii_digit).count();
    if digits == core.chars().count() || core.parse::<f64>().is_ok() {
        return PosTag::Num;
    }
    if digits > 0 || !core.chars().all(|c| c.is_alphabetic() || c == '-' || c == '\'') {
        return PosTag::X;
    }
    if is_capitalized(core) && !sentence_initial {
        return PosTag::Noun;
    }
    SUFFIXES
        .iter()
        .find(|(s, _)| lower.len() > s.len() + 2 && lower.ends_with(s))
        .map_or(PosTag::Noun, |(_, t)| *t)
}

/// Gazetteer hit on a capitalized word, else any capitalized content word
/// away from a sentence start is `Other`.
pub fn ner_tag(text: &str, sentence_initial: bool) -> NerTag {
    let core = core_of(text);
    if !is_capitalized(core) {
        return NerTag::None;
    }
    if let Some(t) = lexicon::gazetteer(core) {
        return t;
    }
    if !sentence_initial && !lexicon::is_function_word(&core.to_lowercase()) {
        NerTag::Other
    } else {
        NerTag::None
    }
}

pub fn knowledge_features(word: &LayoutWord, sentence_initial: bool, freq: &FrequencyTable) -> KnowledgeVector {
    let log_tf = freq.log_tf(&word.normalized());
    KnowledgeVector {
        log_term_frequency: log_tf,
        tf_bin: freq.tf_bin(log_tf),
        pos_tag: pos_tag(&word.text, sentence_initial),
        ner_tag: ner_tag(&word.text, sentence_initial),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoundingBox;

    fn w(t: &str) -> LayoutWord {
        LayoutWord {
            text: t.into(),
            bbox: BoundingBox::new(0.0, 0.0, 1.0, 1.0),
            line_index: 0,
        }
    }

    fn table() -> FrequencyTable {
        let mut c = BTreeMap::new();
        c.insert("the".to_string(), 1000);
        c.insert("cat".to_string(), 12);
        FrequencyTable::from_counts(c)
    }

    #[test]
    fn unseen_word_is_bin_zero() {
        let k = knowledge_features(&w("zyzzyva"), false, &table());
        assert_eq!(k.log_term_frequency, 0.0);
        assert_eq!(k.tf_bin, 0);
    }

    #[test]
    fn most_frequent_word_is_top_bin() {
        let t = table();
        assert_eq!(knowledge_features(&w("The"), true, &t).tf_bin, 15);
        let cat = knowledge_features(&w("cat"), false, &t);
        assert_eq!(cat.log_term_frequency, 13f64.ln());
        assert_eq!(cat.tf_bin, (15.0 * 13f64.ln() / 1001f64.ln()).floor() as usize);
    }

    #[test]
    fn named_entities() {
        assert_eq!(ner_tag("Paris,", false), NerTag::Place);
        assert_eq!(ner_tag("Paris", true), NerTag::Place);
        assert_eq!(ner_tag("Zorblat", false), NerTag::Other);
        assert_eq!(ner_tag("Zorblat", true), NerTag::None);
        assert_eq!(ner_tag("paris", false), NerTag::None);
    }

    #[test]
    fn pos_rules() {
        assert_eq!(pos_tag("the", false), PosTag::Det);
        assert_eq!(pos_tag("quickly", false), PosTag::Adv);
        assert_eq!(pos_tag("nation.", false), PosTag::Noun);
        assert_eq!(pos_tag("famous", false), PosTag::Adj);
        assert_eq!(pos_tag("1984", false), PosTag::Num);
        assert_eq!(pos_tag("--", false), PosTag::Punct);
        assert_eq!(pos_tag("Zorblat", false), PosTag::Noun);
        assert_eq!(pos_tag("a1b", false), PosTag::X);
    }
}
