use std::collections::{BTreeMap, HashSet};

use crate::error::{invalid, CoreError, Result};
use crate::text::DocumentLayout;

/// Padding unit standing in for the missing predecessors of a word near
/// the start of its sentence.
pub const SENTENCE_START: &str = "<s>";

/// Normalized words of a document with their sentence boundaries.
#[derive(Clone, Debug, PartialEq)]
pub struct DocText {
    pub words: Vec<String>,
    pub sentence_initial: Vec<bool>,
}

impl DocText {
    pub fn from_layout(layout: &DocumentLayout) -> Self {
        Self {
            words: layout.words.iter().map(|w| w.normalized()).collect(),
            sentence_initial: (0..layout.words.len()).map(|i| layout.is_sentence_initial(i)).collect(),
        }
    }

    /// `(w_{i−n+1}, …, w_i)`, not crossing the sentence start; missing
    /// predecessors become [`SENTENCE_START`].
    pub fn ngram(&self, i: usize, n: usize) -> Vec<&str> {
        let mut out = vec![self.words[i].as_str()];
        let mut j = i;
        while out.len() < n {
            if self.sentence_initial[j] {
                out.push(SENTENCE_START);
            } else {
                j -= 1;
                out.push(self.words[j].as_str());
            }
        }
        out.reverse();
        out
    }
}

/// Positive n-grams harvested from training labels.
#[derive(Clone, Debug, PartialEq)]
pub struct NGramPredictor {
    pub n: usize,
    positive: HashSet<Vec<String>>,
}

impl NGramPredictor {
    /// `train` yields `(doc_id, word_index, unknown)`; only unknown words
    /// contribute their n-gram.
    pub fn fit<'a>(
        n: usize,
        docs: &BTreeMap<String, DocText>,
        train: impl IntoIterator<Item = (&'a str, usize, bool)>,
    ) -> Result<Self> {
        if !(1..=3).contains(&n) {
            return invalid(format!("n-gram order {n} outside 1..=3"));
        }
        let mut positive = HashSet::new();
        for (doc, i, unknown) in train {
            if unknown {
                let d = lookup(docs, doc, i)?;
                positive.insert(d.ngram(i, n).into_iter().map(str::to_string).collect());
            }
        }
        Ok(Self { n, positive })
    }

    pub fn len(&self) -> usize {
        self.positive.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positive.is_empty()
    }

    pub fn predict(&self, doc: &DocText, i: usize) -> bool {
        let g: Vec<String> = doc.ngram(i, self.n).into_iter().map(str::to_string).collect();
        self.positive.contains(&g)
    }
}

fn lookup<'d>(docs: &'d BTreeMap<String, DocText>, doc: &str, i: usize) -> Result<&'d DocText> {
    let d = docs.get(doc).ok_or_else(|| CoreError::Invalid(format!("unknown document {doc}")))?;
    if i >= d.words.len() {
        return invalid(format!("word {i} out of range for {doc}"));
    }
    Ok(d)
}
