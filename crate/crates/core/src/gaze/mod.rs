//! Gaze streams: windowing, outlier rejection, smoothing, resampling and
//! the per-box distance/duration features.

mod features;
mod filter;
mod io;
mod window;

pub use features::{gaze_duration, gaze_mae, gaze_token_distance};
pub use filter::{moving_average, resample, CubicSpline, Interpolant, Interpolation, Resampled};
pub use io::{parse_stream, read_stream, write_stream};
pub use window::{
    reject_or_denoise, region_of_interest, segment_windows, window_at, GazeWindow, WindowStatus, INSTABILITY_LINES,
    MINORITY_FRACTION, OUTLIER_GAP_LINES,
};

use serde::{Deserialize, Serialize};

/// Noise grade of the device that produced a sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Tracker,
    Webcam,
}

/// One gaze point; `t_ms` counts milliseconds from stream start.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GazeSample {
    #[serde(serialize_with = "io::ser_time")]
    pub t_ms: f64,
    pub x: f64,
    pub y: f64,
    pub src: Source,
}

impl GazeSample {
    pub fn new(t_ms: f64, x: f64, y: f64, src: Source) -> Self {
        Self { t_ms, x, y, src }
    }
}

/// Moving-average length applied to webcam streams.
pub const WEBCAM_SMOOTHING: usize = 5;
/// Rate webcam streams are resampled to.
pub const WEBCAM_RESAMPLE_HZ: f64 = 60.0;

/// Device-dependent clean-up before windowing: webcam streams are smoothed
/// and resampled onto a 60 Hz grid; tracker streams pass through.
///
/// Samples that repeat an earlier timestamp are dropped so the resampler
/// sees strictly increasing knots.
pub fn preprocess(stream: &[GazeSample]) -> crate::Result<Vec<GazeSample>> {
    let is_webcam = stream.iter().any(|s| s.src == Source::Webcam);
    if !is_webcam || stream.is_empty() {
        return Ok(stream.to_vec());
    }
    let mut dedup: Vec<GazeSample> = Vec::with_capacity(stream.len());
    for s in stream {
        if dedup.last().map_or(true, |p| s.t_ms > p.t_ms) {
            dedup.push(*s);
        }
    }
    let smoothed = moving_average(&dedup, WEBCAM_SMOOTHING)?;
    Ok(resample(&smoothed, WEBCAM_RESAMPLE_HZ)?.samples)
}
