use serde::{Deserialize, Serialize};

use super::GazeSample;
use crate::error::{CoreError, Result};
use crate::geometry::BoundingBox;

/// A y-cluster smaller than this fraction of the samples is treated as
/// a blink/glitch when it sits far from the majority.
pub const MINORITY_FRACTION: f64 = 0.2;
/// Gap (in line heights) separating two y-clusters.
pub const OUTLIER_GAP_LINES: f64 = 3.0;
/// Core y-range (in line heights) above which a window is unstable.
pub const INSTABILITY_LINES: f64 = 6.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowStatus {
    Accepted,
    RejectedUnstable,
    RejectedEmpty,
}

/// One second of gaze (`core`) with one extra second on each side
/// (`extended`, which includes the core).
#[derive(Clone, Debug, PartialEq)]
pub struct GazeWindow {
    pub index: usize,
    pub start_ms: f64,
    pub window_ms: f64,
    pub core: Vec<GazeSample>,
    /// Samples before the core, after the core; kept separate so the
    /// extended set can be reassembled in time order.
    pub before: Vec<GazeSample>,
    pub after: Vec<GazeSample>,
    pub status: WindowStatus,
}

impl GazeWindow {
    pub fn end_ms(&self) -> f64 {
        self.start_ms + self.window_ms
    }

    /// Extended samples (before ++ core ++ after), time ordered.
    pub fn extended(&self) -> Vec<GazeSample> {
        let mut v = Vec::with_capacity(self.n_g());
        v.extend_from_slice(&self.before);
        v.extend_from_slice(&self.core);
        v.extend_from_slice(&self.after);
        v
    }

    pub fn n_g(&self) -> usize {
        self.before.len() + self.core.len() + self.after.len()
    }

    pub fn is_accepted(&self) -> bool {
        self.status == WindowStatus::Accepted
    }
}

/// Cuts a time-sorted stream into consecutive, non-overlapping windows of
/// `window_ms`, aligned to t = 0. Window k exists iff some sample reaches
/// its end, so a trailing partial window is dropped. Extensions reach one
/// window length to each side and are clipped by the available samples.
pub fn segment_windows(stream: &[GazeSample], window_ms: f64) -> Vec<GazeWindow> {
    let Some(last) = stream.last() else {
        return Vec::new();
    };
    if !(window_ms > 0.0) {
        return Vec::new();
    }
    let n = (last.t_ms / window_ms).floor() as usize;
    (0..n).map(|k| window_at(stream, k, window_ms)).collect()
}

/// Window `k` of a time-sorted stream, without checking that it exists.
/// Only samples within one window length of the core are read, so any
/// suffix of the stream starting at or before `(k − 1)·window_ms` gives
/// the same window.
pub fn window_at(stream: &[GazeSample], k: usize, window_ms: f64) -> GazeWindow {
    let idx = |t: f64| stream.partition_point(|s| s.t_ms < t);
    let start = k as f64 * window_ms;
    let (a, b, c, d) = (
        idx(start - window_ms),
        idx(start),
        idx(start + window_ms),
        idx(start + 2.0 * window_ms),
    );
    GazeWindow {
        index: k,
        start_ms: start,
        window_ms,
        core: stream[b..c].to_vec(),
        before: stream[a..b].to_vec(),
        after: stream[c..d].to_vec(),
        status: WindowStatus::Accepted,
    }
}

/// Flags samples belonging to small y-clusters far from the majority.
/// Clusters are maximal runs of the sorted y values with gaps ≤ `gap`.
fn keep_mask(samples: &[GazeSample], gap: f64) -> Vec<bool> {
    let n = samples.len();
    if n == 0 {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| samples[a].y.total_cmp(&samples[b].y).then(a.cmp(&b)));
    let mut cluster = vec![0usize; n];
    let mut sizes = vec![1usize];
    for w in 1..n {
        if samples[order[w]].y - samples[order[w - 1]].y > gap {
            sizes.push(0);
        }
        let c = sizes.len() - 1;
        sizes[c] += 1;
        cluster[order[w]] = c;
    }
    // the first (lowest-y) largest cluster is the majority
    let major = (0..sizes.len()).fold(0, |best, c| if sizes[c] > sizes[best] { c } else { best });
    let limit = MINORITY_FRACTION * n as f64;
    (0..n)
        .map(|i| cluster[i] == major || sizes[cluster[i]] as f64 >= limit)
        .collect()
}

fn filtered(samples: &[GazeSample], gap: f64) -> Vec<GazeSample> {
    samples
        .iter()
        .zip(keep_mask(samples, gap))
        .filter_map(|(s, k)| k.then_some(*s))
        .collect()
}

/// Removes far-off minority y-clusters (blinks, tracking glitches) and
/// rejects windows whose remaining core still spans too many lines.
///
/// The rule runs separately on the core and on each one-second extension
/// part. Already rejected windows are returned unchanged, which together
/// with the rule's stability makes the operation idempotent.
pub fn reject_or_denoise(window: &GazeWindow, line_height: f64) -> GazeWindow {
    let mut w = window.clone();
    if w.status != WindowStatus::Accepted {
        return w;
    }
    let gap = OUTLIER_GAP_LINES * line_height;
    w.core = filtered(&window.core, gap);
    w.before = filtered(&window.before, gap);
    w.after = filtered(&window.after, gap);
    if w.core.is_empty() {
        w.status = WindowStatus::RejectedEmpty;
        return w;
    }
    let (lo, hi) = w
        .core
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.y), hi.max(s.y)));
    if hi - lo > INSTABILITY_LINES * line_height {
        w.status = WindowStatus::RejectedUnstable;
    }
    w
}

/// Bounding box of the retained core samples.
pub fn region_of_interest(window: &GazeWindow) -> Result<BoundingBox> {
    if window.status != WindowStatus::Accepted {
        return Err(CoreError::NoRegionOfInterest(window.index));
    }
    BoundingBox::hull(window.core.iter().map(|s| (s.x, s.y))).ok_or(CoreError::NoRegionOfInterest(window.index))
}
