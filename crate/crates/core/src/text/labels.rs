//! Per-user unknown-word labels, stored as JSON Lines.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Label {
    pub user_id: String,
    pub doc_id: String,
    pub word_index: usize,
    pub unknown: bool,
}

pub fn write_labels(path: &Path, labels: &[Label]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for l in labels {
        serde_json::to_writer(&mut w, l)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_labels(path: &Path) -> Result<Vec<Label>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| CoreError::Parse {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Label lookup for one (user, document) reading.
#[derive(Clone, Debug, Default)]
pub struct LabelSet {
    pub user_id: String,
    pub doc_id: String,
    by_word: HashMap<usize, bool>,
}

impl LabelSet {
    pub fn new(user_id: &str, doc_id: &str) -> Self {
        Self {
            user_id: user_id.to_string(),
            doc_id: doc_id.to_string(),
            by_word: HashMap::new(),
        }
    }

    pub fn from_labels<'a>(user_id: &str, doc_id: &str, labels: impl IntoIterator<Item = &'a Label>) -> Self {
        let mut s = Self::new(user_id, doc_id);
        for l in labels {
            if l.user_id == user_id && l.doc_id == doc_id {
                s.by_word.insert(l.word_index, l.unknown);
            }
        }
        s
    }

    pub fn insert(&mut self, word_index: usize, unknown: bool) {
        self.by_word.insert(word_index, unknown);
    }

    pub fn get(&self, word_index: usize) -> Option<bool> {
        self.by_word.get(&word_index).copied()
    }

    pub fn len(&self) -> usize {
        self.by_word.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_word.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("labels.jsonl");
        let ls = vec![
            Label { user_id: "u0".into(), doc_id: "d".into(), word_index: 3, unknown: true },
            Label { user_id: "u1".into(), doc_id: "d".into(), word_index: 3, unknown: false },
        ];
        write_labels(&p, &ls).unwrap();
        assert_eq!(read_labels(&p).unwrap(), ls);
        let set = LabelSet::from_labels("u0", "d", &ls);
        assert_eq!(set.get(3), Some(true));
        assert_eq!(set.get(4), None);
    }
}
