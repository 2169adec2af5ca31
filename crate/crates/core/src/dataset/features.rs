//! Per-window model inputs: gaze channels, token rows and candidate-word
//! features. Shared by offline dataset building and the live session so
//! both produce identical rows for identical windows.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::gaze::{
    gaze_duration, gaze_token_distance, moving_average, preprocess, region_of_interest, reject_or_denoise,
    segment_windows, GazeSample, GazeWindow,
};
use crate::geometry::BoundingBox;
use crate::model::{ModelConfig, ModelRow, TokenInput, SCREEN_HEIGHT, SCREEN_WIDTH};
use crate::text::{knowledge_features, tokenize, DocumentLayout, FrequencyTable, KnowledgeVector, Vocabulary};

/// Core window length.
pub const WINDOW_MS: f64 = 1000.0;
/// Smoothing applied to the encoder's smoothed gaze channels.
pub const CHANNEL_SMOOTHING: usize = 5;

/// Corpus-level text resources.
#[derive(Clone, Copy)]
pub struct TextContext<'a> {
    pub vocab: &'a Vocabulary,
    pub freq: &'a FrequencyTable,
}

pub fn screen_diagonal() -> f64 {
    SCREEN_WIDTH.hypot(SCREEN_HEIGHT)
}

/// A non-function word inside a window's region of interest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateWord {
    pub word_index: usize,
    pub text: String,
    /// Row of the window holding this word's tokens.
    pub row: usize,
    /// Token positions within that row.
    pub tokens: Vec<usize>,
    /// Gaze-word distance over the extended window, in pixels.
    pub distance: f64,
    /// Extended-window samples inside the word box.
    pub duration: usize,
    pub n_g: usize,
    pub knowledge: KnowledgeVector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowFeatures {
    pub window_index: usize,
    pub roi: BoundingBox,
    pub rows: Vec<ModelRow>,
    pub words: Vec<CandidateWord>,
}

/// Preprocess, segment and denoise a raw stream. Rejected windows are
/// kept with their status so callers can count them.
pub fn denoised_windows(stream: &[GazeSample], line_height: f64) -> Result<Vec<GazeWindow>> {
    let work = preprocess(stream)?;
    Ok(segment_windows(&work, WINDOW_MS)
        .iter()
        .map(|w| reject_or_denoise(w, line_height))
        .collect())
}

/// Linear interpolation of `samples` onto a grid of `hz` starting at the
/// first sample, at most `max_len` points.
fn on_grid(samples: &[GazeSample], hz: f64, max_len: usize) -> Vec<(f64, f64)> {
    let t0 = samples[0].t_ms;
    let span = samples[samples.len() - 1].t_ms - t0;
    let step = 1000.0 / hz;
    let n = ((span / step + 1e-9).floor() as usize + 1).min(max_len);
    let mut j = 0;
    (0..n)
        .map(|k| {
            let t = t0 + k as f64 * step;
            while j + 1 < samples.len() && samples[j + 1].t_ms <= t {
                j += 1;
            }
            let a = &samples[j];
            match samples.get(j + 1) {
                Some(b) if b.t_ms > a.t_ms && t > a.t_ms => {
                    let u = (t - a.t_ms) / (b.t_ms - a.t_ms);
                    (a.x + u * (b.x - a.x), a.y + u * (b.y - a.y))
                }
                _ => (a.x, a.y),
            }
        })
        .collect()
}

/// Encoder input `[smoothed x, smoothed y, raw x, raw y]` per grid step,
/// screen-normalized.
pub fn gaze_channels(extended: &[GazeSample], cfg: &ModelConfig) -> Result<Vec<[f64; 4]>> {
    if extended.is_empty() {
        return invalid("empty gaze window");
    }
    let smooth = moving_average(extended, CHANNEL_SMOOTHING)?;
    let raw = on_grid(extended, cfg.gaze_hz, cfg.max_gaze_len);
    let sm = on_grid(&smooth, cfg.gaze_hz, cfg.max_gaze_len);
    Ok(sm
        .iter()
        .zip(&raw)
        .map(|(s, r)| [s.0 / SCREEN_WIDTH, s.1 / SCREEN_HEIGHT, r.0 / SCREEN_WIDTH, r.1 / SCREEN_HEIGHT])
        .collect())
}

/// Model rows and candidate features for one accepted window, or `None`
/// when its region of interest holds no candidate word.
///
/// Every word touching the region (function words included) enters the
/// token context; words are packed into rows of at most `max_tokens`
/// tokens, each row carrying the same gaze channels.
pub fn window_features(
    window: &GazeWindow,
    layout: &DocumentLayout,
    text: TextContext<'_>,
    cfg: &ModelConfig,
) -> Result<Option<WindowFeatures>> {
    let roi = region_of_interest(window)?;
    let extended = window.extended();
    let n_g = extended.len();
    let in_roi: Vec<usize> = (0..layout.words.len()).filter(|&i| layout.words[i].bbox.intersects(&roi)).collect();
    if !in_roi.iter().any(|&i| !layout.words[i].is_function_word()) {
        return Ok(None);
    }
    let gaze = gaze_channels(&extended, cfg)?;
    let diag = screen_diagonal();
    let mut rows: Vec<ModelRow> = Vec::new();
    let mut words = Vec::new();
    let mut current: Vec<TokenInput> = Vec::new();
    let mut pending: Vec<CandidateWord> = Vec::new();
    let flush = |current: &mut Vec<TokenInput>, pending: &mut Vec<CandidateWord>, rows: &mut Vec<ModelRow>, words: &mut Vec<CandidateWord>| {
        if !pending.is_empty() {
            for mut c in pending.drain(..) {
                c.row = rows.len();
                words.push(c);
            }
            rows.push(ModelRow {
                gaze: gaze.clone(),
                tokens: std::mem::take(current),
            });
        }
        current.clear();
    };
    for &i in &in_roi {
        let w = &layout.words[i];
        let spans = tokenize(w, text.vocab)?;
        if spans.len() > cfg.max_tokens {
            return invalid(format!("word {i} ({}) has {} tokens, more than max_tokens", w.text, spans.len()));
        }
        if current.len() + spans.len() > cfg.max_tokens {
            flush(&mut current, &mut pending, &mut rows, &mut words);
        }
        let k = knowledge_features(w, layout.is_sentence_initial(i), text.freq);
        let first = current.len();
        for s in &spans {
            let (cx, cy) = s.bbox.center();
            current.push(TokenInput {
                token_id: s.token_id,
                wx: cx / SCREEN_WIDTH,
                wy: cy / SCREEN_HEIGHT,
                d: gaze_token_distance(&extended, &s.bbox)? / diag,
                t: gaze_duration(&extended, &s.bbox) as f64 / n_g as f64,
                tf_bin: k.tf_bin,
                pos: k.pos_tag.index(),
                ner: k.ner_tag.index(),
                log_tf: k.log_term_frequency,
            });
        }
        if !w.is_function_word() {
            pending.push(CandidateWord {
                word_index: i,
                text: w.text.clone(),
                row: 0,
                tokens: (first..current.len()).collect(),
                distance: gaze_token_distance(&extended, &w.bbox)?,
                duration: gaze_duration(&extended, &w.bbox),
                n_g,
                knowledge: k,
            });
        }
    }
    flush(&mut current, &mut pending, &mut rows, &mut words);
    Ok(Some(WindowFeatures {
        window_index: window.index,
        roi,
        rows,
        words,
    }))
}
