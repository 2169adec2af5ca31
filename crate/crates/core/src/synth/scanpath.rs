//! Noise-free reading behaviour: which word is fixated when, and where.

use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::text::DocumentLayout;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadingConfig {
    /// Target reading speed for text without unknown words.
    pub words_per_second: f64,
    /// Log-normal spread of fixation durations.
    pub fixation_sigma: f64,
    pub saccade_ms: f64,
    pub line_return_ms: f64,
    /// Probability of skipping a function word.
    pub function_skip: f64,
    /// Probability of returning to an unknown word after the next fixation.
    pub regression_prob: f64,
    /// Duration of that return fixation relative to a base fixation.
    pub regression_scale: f64,
    /// Landing-position spread as a fraction of the word width.
    pub landing_sigma: f64,
    pub lead_in_ms: f64,
    pub tail_ms: f64,
}

impl Default for ReadingConfig {
    fn default() -> Self {
        Self {
            words_per_second: 2.5,
            fixation_sigma: 0.45,
            saccade_ms: 30.0,
            line_return_ms: 60.0,
            function_skip: 0.35,
            regression_prob: 0.3,
            regression_scale: 0.5,
            landing_sigma: 0.15,
            lead_in_ms: 200.0,
            tail_ms: 300.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fixation {
    pub word: usize,
    pub start_ms: f64,
    pub duration_ms: f64,
    pub x: f64,
    pub y: f64,
}

impl Fixation {
    pub fn end_ms(&self) -> f64 {
        self.start_ms + self.duration_ms
    }
}

/// Fixation sequence with linear saccades between consecutive fixations.
#[derive(Clone, Debug, PartialEq)]
pub struct Scanpath {
    pub fixations: Vec<Fixation>,
    pub end_ms: f64,
}

impl Scanpath {
    /// True eye position at `t_ms`.
    pub fn position(&self, t_ms: f64) -> (f64, f64) {
        let k = self.fixations.partition_point(|f| f.start_ms <= t_ms);
        if k == 0 {
            let f = &self.fixations[0];
            return (f.x, f.y);
        }
        let f = &self.fixations[k - 1];
        if t_ms < f.end_ms() || k == self.fixations.len() {
            return (f.x, f.y);
        }
        let g = &self.fixations[k];
        let a = ((t_ms - f.end_ms()) / (g.start_ms - f.end_ms())).clamp(0.0, 1.0);
        (f.x + a * (g.x - f.x), f.y + a * (g.y - f.y))
    }

    /// Total fixation time per word.
    pub fn dwell_per_word(&self, n_words: usize) -> Vec<f64> {
        let mut d = vec![0.0; n_words];
        for f in &self.fixations {
            d[f.word] += f.duration_ms;
        }
        d
    }
}

/// Median base fixation duration giving `words_per_second` on a page
/// with function-word fraction `func_frac` and no unknown words.
pub fn base_median_ms(cfg: &ReadingConfig, func_frac: f64) -> f64 {
    let per_word = 1000.0 / cfg.words_per_second;
    let fixated = 1.0 - func_frac * cfg.function_skip;
    let per_fixation = per_word / fixated - cfg.saccade_ms;
    per_fixation / (cfg.fixation_sigma * cfg.fixation_sigma / 2.0).exp()
}

/// Left-to-right, line-by-line reading of `layout`. Unknown words are
/// fixated `dwell_gain` times longer and, with `regression_prob`, revisited
/// right after the following fixation.
pub fn plan_scanpath<R: Rng>(
    layout: &DocumentLayout,
    unknown: &[bool],
    dwell_gain: f64,
    cfg: &ReadingConfig,
    rng: &mut R,
) -> Result<Scanpath> {
    if layout.words.is_empty() {
        return invalid(format!("{}: empty layout", layout.doc_id));
    }
    if unknown.len() != layout.words.len() {
        return invalid(format!("{}: {} labels for {} words", layout.doc_id, unknown.len(), layout.words.len()));
    }
    let func: Vec<bool> = layout.words.iter().map(|w| w.is_function_word()).collect();
    let func_frac = func.iter().filter(|&&f| f).count() as f64 / func.len() as f64;
    let median = base_median_ms(cfg, func_frac);
    let dur = LogNormal::new(median.ln(), cfg.fixation_sigma).map_err(|e| crate::CoreError::Invalid(e.to_string()))?;
    let unit = Normal::new(0.0, 1.0).expect("unit normal");

    let mut fixations: Vec<Fixation> = Vec::new();
    let mut t = cfg.lead_in_ms;
    let mut pending: Option<usize> = None;
    let mut last_line = layout.words[0].line_index;
    let fixate = |word: usize, duration: f64, t: &mut f64, rng: &mut R, fixations: &mut Vec<Fixation>| {
        let b = &layout.words[word].bbox;
        let (cx, cy) = b.center();
        let x = (cx + b.width() * (cfg.landing_sigma * unit.sample(rng) - 0.1)).clamp(b.x_min, b.x_max);
        let y = (cy + unit.sample(rng)).clamp(b.y_min, b.y_max);
        if !fixations.is_empty() {
            *t += cfg.saccade_ms;
        }
        fixations.push(Fixation {
            word,
            start_ms: *t,
            duration_ms: duration,
            x,
            y,
        });
        *t += duration;
    };
    for (i, w) in layout.words.iter().enumerate() {
        if func[i] && !unknown[i] && rng.gen_bool(cfg.function_skip) {
            continue;
        }
        if w.line_index != last_line {
            t += cfg.line_return_ms;
            last_line = w.line_index;
        }
        let gain = if unknown[i] { dwell_gain } else { 1.0 };
        let d = dur.sample(rng) * gain;
        fixate(i, d, &mut t, rng, &mut fixations);
        if let Some(j) = pending.take() {
            let d = dur.sample(rng) * cfg.regression_scale;
            fixate(j, d, &mut t, rng, &mut fixations);
            let d = dur.sample(rng) * cfg.regression_scale;
            fixate(i, d, &mut t, rng, &mut fixations);
        }
        if unknown[i] && rng.gen_bool(cfg.regression_prob) {
            pending = Some(i);
        }
    }
    Ok(Scanpath {
        end_ms: t + cfg.tail_ms,
        fixations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::corpus::{gen_corpus, CorpusConfig};
    use crate::synth::lexicon::{Lexicon, LexiconConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn page() -> DocumentLayout {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let lex = Lexicon::generate(&LexiconConfig::default(), &mut rng).unwrap();
        gen_corpus(&lex, &CorpusConfig { n_docs: 1, ..Default::default() }, &mut rng).unwrap().0.remove(0)
    }

    #[test]
    fn reading_speed_is_calibrated() {
        let doc = page();
        let known = vec![false; doc.words.len()];
        let mut speeds = Vec::new();
        for s in 0..20 {
            let p = plan_scanpath(&doc, &known, 3.0, &ReadingConfig::default(), &mut ChaCha8Rng::seed_from_u64(s)).unwrap();
            speeds.push(doc.words.len() as f64 / (p.end_ms / 1000.0));
        }
        let mean = speeds.iter().sum::<f64>() / speeds.len() as f64;
        assert!((2.3..2.7).contains(&mean), "{mean} words/s");
    }

    #[test]
    fn positions_stay_on_fixated_words_and_move_forward() {
        let doc = page();
        let known = vec![false; doc.words.len()];
        let p = plan_scanpath(&doc, &known, 1.0, &ReadingConfig::default(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        for f in &p.fixations {
            let (x, y) = p.position(f.start_ms + f.duration_ms / 2.0);
            assert!(doc.words[f.word].bbox.contains(x, y));
        }
        assert!(p.fixations.windows(2).all(|w| w[0].word < w[1].word));
    }

    #[test]
    fn unknown_words_get_longer_dwell_and_regressions() {
        let doc = page();
        let unknown: Vec<bool> = (0..doc.words.len()).map(|i| i % 7 == 3 && !doc.words[i].is_function_word()).collect();
        let p = plan_scanpath(&doc, &unknown, 3.0, &ReadingConfig::default(), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let dwell = p.dwell_per_word(doc.words.len());
        let mean = |sel: bool| {
            let v: Vec<f64> = (0..dwell.len()).filter(|&i| unknown[i] == sel && dwell[i] > 0.0).map(|i| dwell[i]).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        assert!(mean(true) > 2.5 * mean(false));
        assert!(p.fixations.windows(2).any(|w| w[1].word < w[0].word));
    }
}
