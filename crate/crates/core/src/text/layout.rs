use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::lexicon;
use crate::error::{invalid, Result};
use crate::geometry::BoundingBox;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayoutWord {
    pub text: String,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    #[serde(rename = "line")]
    pub line_index: usize,
}

impl LayoutWord {
    /// Lowercased word with surrounding punctuation removed.
    pub fn normalized(&self) -> String {
        normalize(&self.text)
    }

    pub fn is_function_word(&self) -> bool {
        lexicon::is_function_word(&self.normalized())
    }
}

/// Strips leading/trailing non-alphanumeric characters and lowercases.
pub fn normalize(text: &str) -> String {
    core_of(text).to_lowercase()
}

/// The alphanumeric core of a word (original case).
pub fn core_of(text: &str) -> &str {
    text.trim_matches(|c: char| !c.is_alphanumeric())
}

/// A rendered page: words in reading order with pixel boxes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DocumentLayout {
    pub doc_id: String,
    pub line_height: f64,
    pub words: Vec<LayoutWord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub columns: Vec<BoundingBox>,
}

impl DocumentLayout {
    pub fn load(path: &Path) -> Result<Self> {
        let layout: Self = serde_json::from_slice(&fs::read(path)?)?;
        layout.validate()?;
        Ok(layout)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.line_height > 0.0) {
            return invalid(format!("{}: line height must be positive", self.doc_id));
        }
        for (i, w) in self.words.iter().enumerate() {
            if w.text.is_empty() {
                return invalid(format!("{}: word {i} is empty", self.doc_id));
            }
            if !self.columns.is_empty() && !self.columns.iter().any(|c| c.contains_box(&w.bbox)) {
                return invalid(format!("{}: word {i} lies outside every column", self.doc_id));
            }
        }
        Ok(())
    }

    /// True for the first word and for words following `.`, `!` or `?`.
    pub fn is_sentence_initial(&self, i: usize) -> bool {
        i == 0
            || self.words[i - 1]
                .text
                .trim_end_matches(|c: char| matches!(c, '"' | '\'' | ')' | ']'))
                .ends_with(['.', '!', '?'])
    }

    /// Content words whose box touches `roi`, in reading order.
    pub fn candidate_words(&self, roi: &BoundingBox) -> Vec<usize> {
        candidate_words(self, roi)
    }
}

/// Indices of non-function words whose box intersects `roi`.
pub fn candidate_words(layout: &DocumentLayout, roi: &BoundingBox) -> Vec<usize> {
    layout
        .words
        .iter()
        .enumerate()
        .filter(|(_, w)| w.bbox.intersects(roi) && !w.is_function_word())
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn line(words: &[&str]) -> DocumentLayout {
        let mut x = 0.0;
        let words = words
            .iter()
            .map(|t| {
                let w = t.chars().count() as f64 * 8.0;
                let b = BoundingBox::new(x, 0.0, x + w, 16.0);
                x += w + 4.0;
                LayoutWord {
                    text: t.to_string(),
                    bbox: b,
                    line_index: 0,
                }
            })
            .collect();
        DocumentLayout {
            doc_id: "d".into(),
            line_height: 20.0,
            words,
            columns: vec![],
        }
    }

    #[test]
    fn function_words_are_not_candidates() {
        let l = line(&["the", "quick", "fox"]);
        let roi = BoundingBox::new(0.0, 0.0, 200.0, 16.0);
        assert_eq!(candidate_words(&l, &roi), vec![1, 2]);
    }

    #[test]
    fn one_pixel_overlap_counts() {
        let l = line(&["quick"]);
        assert_eq!(candidate_words(&l, &BoundingBox::new(39.0, 15.0, 60.0, 30.0)), vec![0]);
        assert!(candidate_words(&l, &BoundingBox::new(41.0, 15.0, 60.0, 30.0)).is_empty());
    }

    #[test]
    fn sentence_starts() {
        let l = line(&["Hi", "there.", "Paris", "is", "(big)."]);
        assert!(l.is_sentence_initial(0));
        assert!(!l.is_sentence_initial(1));
        assert!(l.is_sentence_initial(2));
        assert_eq!(normalize("(Big)."), "big");
    }

    #[test]
    fn layout_file_shape() {
        let l = line(&["a"]);
        let v: serde_json::Value = serde_json::to_value(&l).unwrap();
        assert_eq!(v["words"][0]["box"], serde_json::json!([0.0, 0.0, 8.0, 16.0]));
        assert_eq!(v["words"][0]["line"], 0);
        let back: DocumentLayout = serde_json::from_value(v).unwrap();
        assert_eq!(back, l);
    }
}
