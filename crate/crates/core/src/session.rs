//! Streaming detection over one reading session.
//!
//! Samples arrive in time order. Window `k` covers `[k, k+1)` seconds of
//! session time and is processed as soon as a sample at or after `k + 2`
//! seconds arrives, i.e. once its trailing extension is complete; the rest
//! are flushed by [`Session::finish`]. Each window goes through the same
//! denoising and feature code as offline dataset building, so for tracker
//! streams the per-window scores equal the offline ones exactly.

use std::collections::{HashSet, VecDeque};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::{window_features, TextContext, WINDOW_MS};
use crate::error::{CoreError, Result};
use crate::eval::word_scores;
use crate::gaze::{preprocess, reject_or_denoise, window_at, GazeSample, WindowStatus};
use crate::model::{DetectorModel, ModelRow};
use crate::text::{DocumentLayout, FrequencyTable, Vocabulary};

/// Extra history kept before the oldest window still needed, so webcam
/// smoothing and resampling see context on both sides.
pub const RETAIN_MARGIN_MS: f64 = 1000.0;

/// A frozen model with the text resources it was trained with.
pub struct Detector {
    pub model: DetectorModel,
    pub vocab: Vocabulary,
    pub freq: FrequencyTable,
}

impl Detector {
    pub fn text(&self) -> TextContext<'_> {
        TextContext {
            vocab: &self.vocab,
            freq: &self.freq,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub word: String,
    pub word_index: usize,
    pub window: usize,
    pub p: f64,
}

/// Outcome of one processed window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowResult {
    pub window: usize,
    pub status: WindowStatus,
    /// `(word_index, score)` for every candidate word.
    pub scores: Vec<(usize, f64)>,
    /// Detections not emitted before in this session.
    pub detections: Vec<Detection>,
    /// Feature extraction plus inference, in milliseconds.
    pub compute_ms: f64,
}

pub struct Session {
    pub id: String,
    layout: Arc<DocumentLayout>,
    detector: Arc<Detector>,
    buffer: VecDeque<GazeSample>,
    next_window: usize,
    last_t: Option<f64>,
    emitted: HashSet<usize>,
    latency_ms: Vec<f64>,
}

impl Session {
    pub fn new(id: impl Into<String>, layout: Arc<DocumentLayout>, detector: Arc<Detector>) -> Self {
        Self {
            id: id.into(),
            layout,
            detector,
            buffer: VecDeque::new(),
            next_window: 0,
            last_t: None,
            emitted: HashSet::new(),
            latency_ms: Vec::new(),
        }
    }

    pub fn layout(&self) -> &DocumentLayout {
        &self.layout
    }

    pub fn threshold(&self) -> f64 {
        self.detector.model.threshold
    }

    /// Compute time of every processed window.
    pub fn latency_log(&self) -> &[f64] {
        &self.latency_ms
    }

    pub fn emitted(&self) -> &HashSet<usize> {
        &self.emitted
    }

    /// Adds a sample and processes every window it completes. A sample that
    /// does not advance time is rejected and leaves the session unchanged.
    pub fn push(&mut self, s: GazeSample) -> Result<Vec<WindowResult>> {
        if !(s.t_ms.is_finite() && s.x.is_finite() && s.y.is_finite()) || s.t_ms < 0.0 {
            return Err(CoreError::Invalid(format!("bad gaze sample {s:?}")));
        }
        if self.last_t.is_some_and(|t| s.t_ms <= t) {
            return Err(CoreError::NonMonotonic { index: self.buffer.len() });
        }
        self.last_t = Some(s.t_ms);
        self.buffer.push_back(s);
        let mut out = Vec::new();
        while s.t_ms >= (self.next_window + 2) as f64 * WINDOW_MS {
            out.push(self.process_next()?);
        }
        Ok(out)
    }

    /// Closes every window whose trailing extension ended by `now_ms` on
    /// the session clock, whether or not a later sample arrived. Live
    /// serving calls this on a timer so an idle reader still gets events.
    pub fn advance_to(&mut self, now_ms: f64) -> Result<Vec<WindowResult>> {
        let mut out = Vec::new();
        if self.last_t.is_none() {
            return Ok(out);
        }
        while now_ms >= (self.next_window + 2) as f64 * WINDOW_MS {
            out.push(self.process_next()?);
        }
        Ok(out)
    }

    /// Index of the next window to close.
    pub fn next_window(&self) -> usize {
        self.next_window
    }

    /// Processes the remaining windows that the stream reached.
    pub fn finish(&mut self) -> Result<Vec<WindowResult>> {
        let mut out = Vec::new();
        let Some(last) = self.last_t else { return Ok(out) };
        let n = (last / WINDOW_MS).floor() as usize;
        while self.next_window < n {
            out.push(self.process_next()?);
        }
        Ok(out)
    }

    fn process_next(&mut self) -> Result<WindowResult> {
        let k = self.next_window;
        self.next_window += 1;
        let start = Instant::now();
        let raw: Vec<GazeSample> = self.buffer.iter().copied().collect();
        let work = preprocess(&raw)?;
        let w = reject_or_denoise(&window_at(&work, k, WINDOW_MS), self.layout.line_height);
        let mut result = WindowResult {
            window: k,
            status: w.status,
            scores: Vec::new(),
            detections: Vec::new(),
            compute_ms: 0.0,
        };
        if w.is_accepted() {
            let det = &self.detector;
            if let Some(f) = window_features(&w, &self.layout, det.text(), &det.model.config)? {
                let refs: Vec<&ModelRow> = f.rows.iter().collect();
                let probs = det.model.predict(&refs)?;
                let mut token_p = Vec::new();
                let mut token_word = Vec::new();
                for (i, c) in f.words.iter().enumerate() {
                    for &t in &c.tokens {
                        token_p.push(probs[c.row][t]);
                        token_word.push(Some(i));
                    }
                }
                let scores = word_scores(&token_p, &token_word, f.words.len())?;
                for (c, &p) in f.words.iter().zip(&scores) {
                    result.scores.push((c.word_index, p));
                    if p >= det.model.threshold && self.emitted.insert(c.word_index) {
                        result.detections.push(Detection {
                            word: c.text.clone(),
                            word_index: c.word_index,
                            window: k,
                            p,
                        });
                    }
                }
            }
        }
        result.compute_ms = start.elapsed().as_secs_f64() * 1e3;
        self.latency_ms.push(result.compute_ms);
        self.prune();
        Ok(result)
    }

    /// Drops samples no later window can read.
    fn prune(&mut self) {
        let keep_from = (self.next_window as f64 - 1.0) * WINDOW_MS - RETAIN_MARGIN_MS;
        while self.buffer.front().is_some_and(|s| s.t_ms < keep_from) {
            self.buffer.pop_front();
        }
    }
}

/// Feeds a whole recorded stream through a fresh session.
pub fn replay(
    layout: Arc<DocumentLayout>,
    detector: Arc<Detector>,
    stream: &[GazeSample],
) -> Result<Vec<WindowResult>> {
    let mut s = Session::new("replay", layout, detector);
    let mut out = Vec::new();
    for &g in stream {
        out.extend(s.push(g)?);
    }
    out.extend(s.finish()?);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub trials: usize,
    pub warmup: usize,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
    /// Peak resident set size of the process, when the platform reports it.
    pub peak_rss_kb: Option<u64>,
}

/// Wall-clock inference time at batch size 1 over `trials` repetitions of
/// `rows` (cycled), after `warmup` untimed runs.
pub fn measure_latency(model: &DetectorModel, rows: &[ModelRow], trials: usize, warmup: usize) -> Result<LatencyReport> {
    if rows.is_empty() || trials == 0 {
        return Err(CoreError::Empty("latency trials"));
    }
    for i in 0..warmup {
        model.predict(&[&rows[i % rows.len()]])?;
    }
    let mut t = Vec::with_capacity(trials);
    for i in 0..trials {
        let start = Instant::now();
        model.predict(&[&rows[i % rows.len()]])?;
        t.push(start.elapsed().as_secs_f64() * 1e3);
    }
    let mean = t.iter().sum::<f64>() / trials as f64;
    let mut sorted = t.clone();
    sorted.sort_by(f64::total_cmp);
    let q = |f: f64| sorted[((f * (trials - 1) as f64).round() as usize).min(trials - 1)];
    Ok(LatencyReport {
        trials,
        warmup,
        mean_ms: mean,
        p50_ms: q(0.5),
        p95_ms: q(0.95),
        max_ms: sorted[trials - 1],
        peak_rss_kb: peak_rss_kb(),
    })
}

/// `VmHWM` from `/proc/self/status`.
pub fn peak_rss_kb() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    status
        .lines()
        .find_map(|l| l.strip_prefix("VmHWM:"))
        .and_then(|v| v.split_whitespace().next()?.parse().ok())
}
