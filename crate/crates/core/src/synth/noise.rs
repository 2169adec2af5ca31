//! Measurement models turning a scanpath into a recorded gaze stream.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::scanpath::Scanpath;
use crate::error::{invalid, Result};
use crate::gaze::{GazeSample, Source};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub kind: Source,
    /// Sampling rate range; each recording draws one rate uniformly.
    pub rate_hz: (f64, f64),
    /// White measurement noise σ per axis.
    pub jitter: (f64, f64),
    /// Slowly wandering calibration offset: stationary σ per axis …
    pub offset_sigma: (f64, f64),
    /// … and its correlation time.
    pub offset_tau_ms: f64,
    /// Magnitude of a linear drift with random direction.
    pub drift_px_per_min: f64,
    pub dropout: f64,
    /// Short bursts of samples thrown vertically (blinks, tracking loss).
    pub glitch_per_s: f64,
    pub glitch_len: (usize, usize),
    pub glitch_offset: (f64, f64),
    /// Timestamp noise of the sampling clock.
    pub clock_jitter_ms: f64,
}

impl NoiseModel {
    pub fn tracker() -> Self {
        Self {
            kind: Source::Tracker,
            rate_hz: (60.0, 60.0),
            jitter: (12.0, 9.0),
            offset_sigma: (8.0, 6.0),
            offset_tau_ms: 1500.0,
            drift_px_per_min: 6.0,
            dropout: 0.01,
            glitch_per_s: 0.05,
            glitch_len: (3, 8),
            glitch_offset: (100.0, 200.0),
            clock_jitter_ms: 0.0,
        }
    }

    pub fn webcam() -> Self {
        Self {
            kind: Source::Webcam,
            rate_hz: (24.0, 27.0),
            jitter: (30.0, 22.0),
            offset_sigma: (150.0, 88.0),
            offset_tau_ms: 3000.0,
            drift_px_per_min: 20.0,
            dropout: 0.02,
            glitch_per_s: 0.05,
            glitch_len: (1, 3),
            glitch_offset: (100.0, 200.0),
            clock_jitter_ms: 3.0,
        }
    }

    pub fn for_source(src: Source) -> Self {
        match src {
            Source::Tracker => Self::tracker(),
            Source::Webcam => Self::webcam(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.rate_hz;
        if !(lo > 0.0 && hi >= lo) {
            return invalid("bad sampling rate range");
        }
        let nonneg = [self.jitter.0, self.jitter.1, self.offset_sigma.0, self.offset_sigma.1, self.drift_px_per_min];
        if nonneg.iter().any(|v| !(*v >= 0.0)) || !(self.offset_tau_ms > 0.0) {
            return invalid("noise magnitudes must be nonnegative");
        }
        if !(0.0..1.0).contains(&self.dropout) || !(self.glitch_per_s >= 0.0) {
            return invalid("bad dropout or glitch rate");
        }
        if self.glitch_len.0 == 0 || self.glitch_len.1 < self.glitch_len.0 {
            return invalid("bad glitch length range");
        }
        Ok(())
    }

    /// Samples `path` through this measurement model.
    pub fn record<R: Rng>(&self, path: &Scanpath, rng: &mut R) -> Result<Vec<GazeSample>> {
        self.validate()?;
        let unit = Normal::new(0.0, 1.0).expect("unit normal");
        let rate = if self.rate_hz.1 > self.rate_hz.0 {
            rng.gen_range(self.rate_hz.0..=self.rate_hz.1)
        } else {
            self.rate_hz.0
        };
        let step = 1000.0 / rate;
        let n = (path.end_ms / step).floor() as usize + 1;
        let angle = rng.gen_range(0.0..std::f64::consts::TAU);
        let drift = (angle.cos() * self.drift_px_per_min / 60_000.0, angle.sin() * self.drift_px_per_min / 60_000.0);
        let mut off = (self.offset_sigma.0 * unit.sample(rng), self.offset_sigma.1 * unit.sample(rng));
        let rho = (-step / self.offset_tau_ms).exp();
        let innov = (1.0 - rho * rho).sqrt();
        let p_glitch = (self.glitch_per_s * step / 1000.0).min(1.0);
        let mut glitch_left = 0usize;
        let mut glitch_dy = 0.0;
        let mut out = Vec::with_capacity(n);
        let mut last_t = 0.0f64;
        for k in 0..n {
            let t_ideal = k as f64 * step;
            off.0 = rho * off.0 + innov * self.offset_sigma.0 * unit.sample(rng);
            off.1 = rho * off.1 + innov * self.offset_sigma.1 * unit.sample(rng);
            if glitch_left == 0 && rng.gen_bool(p_glitch) {
                glitch_left = rng.gen_range(self.glitch_len.0..=self.glitch_len.1);
                let mag = rng.gen_range(self.glitch_offset.0..=self.glitch_offset.1);
                glitch_dy = if rng.gen_bool(0.5) { mag } else { -mag };
            }
            let dy_glitch = if glitch_left > 0 {
                glitch_left -= 1;
                glitch_dy
            } else {
                0.0
            };
            let jx = self.jitter.0 * unit.sample(rng);
            let jy = self.jitter.1 * unit.sample(rng);
            let clock = if self.clock_jitter_ms > 0.0 {
                rng.gen_range(-self.clock_jitter_ms..=self.clock_jitter_ms)
            } else {
                0.0
            };
            if rng.gen_bool(self.dropout) {
                continue;
            }
            let t = (t_ideal + clock).round().max(last_t).max(0.0);
            last_t = t;
            let (x, y) = path.position(t_ideal);
            out.push(GazeSample::new(
                t,
                x + off.0 + drift.0 * t_ideal + jx,
                y + off.1 + drift.1 * t_ideal + jy + dy_glitch,
                self.kind,
            ));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::scanpath::Fixation;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn still(ms: f64) -> Scanpath {
        Scanpath {
            fixations: vec![Fixation { word: 0, start_ms: 0.0, duration_ms: ms, x: 500.0, y: 400.0 }],
            end_ms: ms,
        }
    }

    #[test]
    fn tracker_stream_is_60hz_and_monotone() {
        let s = NoiseModel::tracker().record(&still(10_000.0), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!((580..=601).contains(&s.len()), "{}", s.len());
        assert!(s.windows(2).all(|w| w[0].t_ms <= w[1].t_ms));
        assert!(s.iter().all(|g| g.src == Source::Tracker && g.t_ms.fract() == 0.0));
    }

    #[test]
    fn webcam_rate_in_band_and_noisier() {
        let w = NoiseModel::webcam();
        let t = NoiseModel::tracker();
        assert!(w.jitter.0 > t.jitter.0 && w.jitter.1 > t.jitter.1);
        let s = w.record(&still(60_000.0), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let hz = s.len() as f64 / 60.0 / (1.0 - w.dropout);
        assert!((23.5..27.5).contains(&hz), "{hz}");
    }
}
