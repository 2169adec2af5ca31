//! Documents sampled from the lexicon and set in two columns.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::lexicon::Lexicon;
use crate::error::{invalid, Result};
use crate::geometry::BoundingBox;
use crate::text::{DocumentLayout, FrequencyTable, LayoutWord};

/// Page geometry of the rendered documents, in screen pixels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PageStyle {
    pub line_height: f64,
    pub char_width: f64,
    pub space_width: f64,
    pub glyph_height: f64,
    pub top: f64,
    pub column_x: [f64; 2],
    pub column_width: f64,
}

impl Default for PageStyle {
    fn default() -> Self {
        Self {
            line_height: 20.6,
            char_width: 7.0,
            space_width: 4.0,
            glyph_height: 20.6,
            top: 110.0,
            column_x: [236.0, 776.0],
            column_width: 500.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub n_docs: usize,
    pub words_per_doc: usize,
    pub sentence_len: (usize, usize),
    pub comma_rate: f64,
    pub style: PageStyle,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            n_docs: 20,
            words_per_doc: 363,
            sentence_len: (8, 22),
            comma_rate: 0.06,
            style: PageStyle::default(),
        }
    }
}

pub fn doc_id(i: usize) -> String {
    format!("doc{i:03}")
}

/// Samples `n_docs` documents and returns them with the population
/// frequency table of the lexicon (expected counts per 10¹² words), which
/// fixes every word's frequency rank.
pub fn gen_corpus<R: Rng>(lex: &Lexicon, cfg: &CorpusConfig, rng: &mut R) -> Result<(Vec<DocumentLayout>, FrequencyTable)> {
    if cfg.words_per_doc < 50 {
        return invalid(format!("words_per_doc must be at least 50, got {}", cfg.words_per_doc));
    }
    let (lo, hi) = cfg.sentence_len;
    if lo == 0 || hi < lo {
        return invalid("bad sentence length range");
    }
    let docs = (0..cfg.n_docs)
        .map(|i| {
            let mut text = Vec::with_capacity(cfg.words_per_doc);
            while text.len() < cfg.words_per_doc {
                let len = rng.gen_range(lo..=hi).min(cfg.words_per_doc - text.len()).max(1);
                for k in 0..len {
                    let e = &lex.entries[lex.sample(rng)];
                    let mut w = if k == 0 { capitalize(&e.text) } else { e.text.clone() };
                    if k + 1 == len {
                        w.push('.');
                    } else if rng.gen_bool(cfg.comma_rate) {
                        w.push(',');
                    }
                    text.push(w);
                }
            }
            render(&doc_id(i), &text, &cfg.style)
        })
        .collect();
    Ok((docs, population_table(lex)))
}

pub fn population_table(lex: &Lexicon) -> FrequencyTable {
    let counts: BTreeMap<String, u64> = (0..lex.len())
        .map(|i| (lex.entries[i].text.to_lowercase(), (lex.probability(i) * 1e12).round() as u64))
        .collect();
    FrequencyTable::from_counts(counts)
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Greedy line filling at the column width; the first half of the lines
/// go to the left column.
pub fn render(doc_id: &str, text: &[String], style: &PageStyle) -> DocumentLayout {
    let mut lines: Vec<Vec<(String, f64, f64)>> = vec![Vec::new()];
    let mut x = 0.0;
    for w in text {
        let width = w.chars().count() as f64 * style.char_width;
        if x > 0.0 && x + width > style.column_width {
            lines.push(Vec::new());
            x = 0.0;
        }
        lines.last_mut().expect("nonempty").push((w.clone(), x, x + width));
        x += width + style.space_width;
    }
    let per_col = lines.len().div_ceil(2);
    let mut words = Vec::with_capacity(text.len());
    let mut columns = Vec::new();
    for (li, line) in lines.iter().enumerate() {
        let col = li / per_col;
        let row = li % per_col;
        let top = style.top + row as f64 * style.line_height;
        let pad = (style.line_height - style.glyph_height) / 2.0;
        for (w, x0, x1) in line {
            let left = style.column_x[col];
            words.push(LayoutWord {
                text: w.clone(),
                bbox: BoundingBox::new(left + x0, top + pad, left + x1, top + pad + style.glyph_height),
                line_index: li,
            });
        }
    }
    for col in 0..2 {
        let rows = lines.len().saturating_sub(col * per_col).min(per_col);
        if rows > 0 {
            columns.push(BoundingBox::new(
                style.column_x[col],
                style.top,
                style.column_x[col] + style.column_width,
                style.top + rows as f64 * style.line_height,
            ));
        }
    }
    DocumentLayout {
        doc_id: doc_id.to_string(),
        line_height: style.line_height,
        words,
        columns,
    }
}
