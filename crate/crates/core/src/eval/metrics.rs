use std::collections::HashSet;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Number of points on the threshold grid `0.00, 0.01, …, 1.00`.
pub const THRESHOLD_STEPS: usize = 101;

pub fn grid_threshold(k: usize) -> f64 {
    k as f64 / 100.0
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn from_predictions(pred: impl IntoIterator<Item = (bool, bool)>) -> Self {
        let mut c = Self::default();
        for (p, y) in pred {
            match (p, y) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r > 0.0 {
            2.0 * p * r / (p + r)
        } else {
            0.0
        }
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn false_alarm_rate(&self) -> f64 {
        ratio(self.fp, self.fp + self.tn)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Word-level scores; percentages for accuracy/precision/recall/F1, plain
/// fractions for the two rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub threshold: f64,
    pub confusion: Confusion,
    pub correctly_triggered_rate: f64,
    pub false_alarm_rate: f64,
}

impl MetricsReport {
    pub fn from_confusion(c: Confusion, threshold: f64) -> Self {
        Self {
            accuracy: 100.0 * c.accuracy(),
            precision: 100.0 * c.precision(),
            recall: 100.0 * c.recall(),
            f1: 100.0 * c.f1(),
            threshold,
            confusion: c,
            correctly_triggered_rate: c.recall(),
            false_alarm_rate: c.false_alarm_rate(),
        }
    }
}

/// Word score under the any-token rule: the word is predicted unknown at θ
/// iff its highest token probability reaches θ.
pub fn word_scores(token_p: &[f64], token_word: &[Option<usize>], n_words: usize) -> Result<Vec<f64>> {
    if token_p.len() != token_word.len() {
        return invalid(format!("{} token predictions for {} token mappings", token_p.len(), token_word.len()));
    }
    let mut s = vec![f64::NEG_INFINITY; n_words];
    for (i, (&p, w)) in token_p.iter().zip(token_word).enumerate() {
        match w {
            Some(w) if *w < n_words => s[*w] = s[*w].max(p),
            Some(w) => return invalid(format!("token {i} maps to word {w}, only {n_words} words")),
            None => return invalid(format!("token {i} is not mapped to a word")),
        }
    }
    if let Some(w) = s.iter().position(|v| *v == f64::NEG_INFINITY) {
        return invalid(format!("word {w} has no tokens"));
    }
    Ok(s)
}

/// Word-level metrics at `theta` from token predictions.
pub fn word_level_metrics(
    token_p: &[f64],
    theta: f64,
    token_word: &[Option<usize>],
    labels: &[bool],
) -> Result<MetricsReport> {
    let s = word_scores(token_p, token_word, labels.len())?;
    Ok(metrics_at(&s, labels, theta))
}

/// Metrics of word scores thresholded at `theta` (`score ≥ θ` ⇒ unknown).
pub fn metrics_at(scores: &[f64], labels: &[bool], theta: f64) -> MetricsReport {
    let c = Confusion::from_predictions(scores.iter().zip(labels).map(|(&s, &y)| (s >= theta, y)));
    MetricsReport::from_confusion(c, theta)
}

/// The grid threshold maximizing word-level F1; ties go to the smallest θ.
pub fn search_threshold(scores: &[f64], labels: &[bool]) -> f64 {
    // Sort once and sweep the grid from high to low θ so each point costs
    // only the words that newly cross it.
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let pos_total = labels.iter().filter(|&&y| y).count();
    // F1 = 2TP / (2TP + FP + FN), kept as an exact fraction so ties are
    // decided without rounding
    let mut f1s = [(0u64, 1u64); THRESHOLD_STEPS];
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut j = 0;
    for k in (0..THRESHOLD_STEPS).rev() {
        let th = grid_threshold(k);
        while j < order.len() && scores[order[j]] >= th {
            if labels[order[j]] {
                tp += 1;
            } else {
                fp += 1;
            }
            j += 1;
        }
        let fn_ = pos_total as u64 - tp;
        if tp > 0 {
            f1s[k] = (2 * tp, 2 * tp + fp + fn_);
        }
    }
    let mut best = 0;
    for k in 1..THRESHOLD_STEPS {
        let ((a, b), (c, d)) = (f1s[k], f1s[best]);
        if u128::from(a) * u128::from(d) > u128::from(c) * u128::from(b) {
            best = k;
        }
    }
    grid_threshold(best)
}

/// `|A ∩ B| / |A ∪ B|`, defined as 1 for two empty sets.
pub fn jaccard<T: Eq + Hash>(a: &HashSet<T>, b: &HashSet<T>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(b).count() as f64 / union as f64
}
