//! Word-level scoring of trained detectors and the evaluation harness.

mod metrics;
mod suite;

pub use metrics::{
    grid_threshold, jaccard, metrics_at, search_threshold, word_level_metrics, word_scores, Confusion,
    MetricsReport, THRESHOLD_STEPS,
};
pub use suite::*;

use crate::dataset::WindowExample;
use crate::error::Result;
use crate::model::{DetectorModel, ModelRow};

/// Rows per inference batch when scoring.
const SCORE_BATCH: usize = 64;

/// Per-window, per-sample word scores of `model` (max token probability
/// over each candidate word's tokens).
pub fn score_windows(model: &DetectorModel, windows: &[&WindowExample]) -> Result<Vec<Vec<f64>>> {
    let rows: Vec<&ModelRow> = windows.iter().flat_map(|w| &w.rows).collect();
    let mut probs: Vec<Vec<f64>> = Vec::with_capacity(rows.len());
    for chunk in rows.chunks(SCORE_BATCH) {
        probs.extend(model.predict(chunk)?);
    }
    let mut out = Vec::with_capacity(windows.len());
    let mut next = 0;
    for w in windows {
        let row_p = &probs[next..next + w.rows.len()];
        next += w.rows.len();
        out.push(window_word_scores(w, row_p)?);
    }
    Ok(out)
}

/// Word scores of one window from its rows' token probabilities.
pub fn window_word_scores(w: &WindowExample, row_p: &[Vec<f64>]) -> Result<Vec<f64>> {
    let mut token_p = Vec::new();
    let mut token_word = Vec::new();
    for (i, s) in w.samples.iter().enumerate() {
        for &t in &s.word.tokens {
            token_p.push(row_p[s.word.row][t]);
            token_word.push(Some(i));
        }
    }
    word_scores(&token_p, &token_word, w.samples.len())
}

/// Flattened word labels in window/sample order.
pub fn word_labels(windows: &[&WindowExample]) -> Vec<bool> {
    windows.iter().flat_map(|w| w.samples.iter().map(|s| s.unknown)).collect()
}

/// Dev-calibrated threshold and the resulting metrics on `dev`.
pub fn calibrate(model: &DetectorModel, dev: &[&WindowExample]) -> Result<(f64, MetricsReport)> {
    let scores: Vec<f64> = score_windows(model, dev)?.into_iter().flatten().collect();
    let labels = word_labels(dev);
    let th = search_threshold(&scores, &labels);
    Ok((th, metrics_at(&scores, &labels, th)))
}

/// Metrics of `model` on `windows` at its stored threshold.
pub fn evaluate(model: &DetectorModel, windows: &[&WindowExample]) -> Result<MetricsReport> {
    let scores: Vec<f64> = score_windows(model, windows)?.into_iter().flatten().collect();
    Ok(metrics_at(&scores, &word_labels(windows), model.threshold))
}
