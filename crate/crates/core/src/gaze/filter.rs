use serde::{Deserialize, Serialize};

use super::GazeSample;
use crate::error::{invalid, CoreError, Result};

/// Centered moving average of odd length `k` over x and y separately.
/// Near the ends the window shrinks to the samples available, so the
/// output has the input's length and timestamps.
pub fn moving_average(samples: &[GazeSample], k: usize) -> Result<Vec<GazeSample>> {
    if k == 0 || k % 2 == 0 {
        return invalid(format!("moving-average length must be odd, got {k}"));
    }
    let h = k / 2;
    let n = samples.len();
    let avg = |vals: &mut dyn Iterator<Item = f64>| {
        // mean of offsets from the first value: exact for constant runs
        let first = vals.next().expect("nonempty neighborhood");
        let (mut sum, mut lo, mut hi, mut cnt) = (0.0, first, first, 1.0);
        for v in vals {
            sum += v - first;
            lo = f64::min(lo, v);
            hi = f64::max(hi, v);
            cnt += 1.0;
        }
        (first + sum / cnt).clamp(lo, hi)
    };
    Ok((0..n)
        .map(|i| {
            let (a, b) = (i.saturating_sub(h), (i + h + 1).min(n));
            let nb = &samples[a..b];
            GazeSample {
                x: avg(&mut nb.iter().map(|s| s.x)),
                y: avg(&mut nb.iter().map(|s| s.y)),
                ..samples[i]
            }
        })
        .collect())
}

/// Natural cubic spline through `(t_i, y_i)`.
#[derive(Clone, Debug)]
pub struct CubicSpline {
    t: Vec<f64>,
    y: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    d: Vec<f64>,
}

impl CubicSpline {
    /// Requires at least two strictly increasing knots.
    pub fn new(t: &[f64], y: &[f64]) -> Result<Self> {
        let n = t.len();
        if n != y.len() || n < 2 {
            return invalid("spline needs at least two knots with matching values");
        }
        if let Some(i) = (1..n).find(|&i| !(t[i] > t[i - 1])) {
            return Err(CoreError::NonMonotonic { index: i });
        }
        let h: Vec<f64> = (0..n - 1).map(|i| t[i + 1] - t[i]).collect();
        // second-derivative coefficients c (natural ends: c_0 = c_{n-1} = 0),
        // solved with the Thomas algorithm
        let mut c = vec![0.0; n];
        if n > 2 {
            let m = n - 2;
            let mut diag = vec![0.0; m];
            let mut rhs = vec![0.0; m];
            for j in 0..m {
                let i = j + 1;
                diag[j] = 2.0 * (h[i - 1] + h[i]);
                rhs[j] = 3.0 * ((y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1]);
            }
            for j in 1..m {
                let w = h[j] / diag[j - 1];
                diag[j] -= w * h[j];
                rhs[j] -= w * rhs[j - 1];
            }
            c[m] = rhs[m - 1] / diag[m - 1];
            for j in (0..m - 1).rev() {
                c[j + 1] = (rhs[j] - h[j + 1] * c[j + 2]) / diag[j];
            }
        }
        let mut b = vec![0.0; n - 1];
        let mut d = vec![0.0; n - 1];
        for i in 0..n - 1 {
            b[i] = (y[i + 1] - y[i]) / h[i] - h[i] * (2.0 * c[i] + c[i + 1]) / 3.0;
            d[i] = (c[i + 1] - c[i]) / (3.0 * h[i]);
        }
        Ok(Self {
            t: t.to_vec(),
            y: y.to_vec(),
            b,
            c,
            d,
        })
    }

    /// Evaluates the spline; outside the knot range the end cubic is
    /// extended. Knots are reproduced exactly.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.t.len();
        if t == self.t[n - 1] {
            return self.y[n - 1];
        }
        let i = self.t.partition_point(|&k| k <= t).saturating_sub(1).min(n - 2);
        let dt = t - self.t[i];
        self.y[i] + dt * (self.b[i] + dt * (self.c[i] + dt * self.d[i]))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    CubicSpline,
    /// Fewer than four samples: piecewise-linear fallback.
    Linear,
}

/// x(t), y(t) interpolant over a gaze stream.
#[derive(Clone, Debug)]
pub enum Interpolant {
    Spline { x: CubicSpline, y: CubicSpline },
    Linear { t: Vec<f64>, x: Vec<f64>, y: Vec<f64> },
}

impl Interpolant {
    pub fn fit(samples: &[GazeSample]) -> Result<Self> {
        if samples.is_empty() {
            return Err(CoreError::Empty("gaze samples"));
        }
        if let Some(i) = (1..samples.len()).find(|&i| !(samples[i].t_ms > samples[i - 1].t_ms)) {
            return Err(CoreError::NonMonotonic { index: i });
        }
        let t: Vec<f64> = samples.iter().map(|s| s.t_ms).collect();
        let x: Vec<f64> = samples.iter().map(|s| s.x).collect();
        let y: Vec<f64> = samples.iter().map(|s| s.y).collect();
        if samples.len() >= 4 {
            Ok(Self::Spline {
                x: CubicSpline::new(&t, &x)?,
                y: CubicSpline::new(&t, &y)?,
            })
        } else {
            Ok(Self::Linear { t, x, y })
        }
    }

    pub fn method(&self) -> Interpolation {
        match self {
            Self::Spline { .. } => Interpolation::CubicSpline,
            Self::Linear { .. } => Interpolation::Linear,
        }
    }

    pub fn eval(&self, t: f64) -> (f64, f64) {
        match self {
            Self::Spline { x, y } => (x.eval(t), y.eval(t)),
            Self::Linear { t: ts, x, y } => {
                let n = ts.len();
                if n == 1 {
                    return (x[0], y[0]);
                }
                let i = ts.partition_point(|&k| k <= t).saturating_sub(1).min(n - 2);
                if t == ts[i] {
                    return (x[i], y[i]);
                }
                let f = (t - ts[i]) / (ts[i + 1] - ts[i]);
                (x[i] + f * (x[i + 1] - x[i]), y[i] + f * (y[i + 1] - y[i]))
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct Resampled {
    pub samples: Vec<GazeSample>,
    pub method: Interpolation,
}

/// Evaluates the interpolant of `samples` on a uniform `target_hz` grid
/// starting at the first timestamp and not passing the last.
pub fn resample(samples: &[GazeSample], target_hz: f64) -> Result<Resampled> {
    if !(target_hz > 0.0 && target_hz.is_finite()) {
        return invalid(format!("target rate must be positive, got {target_hz}"));
    }
    let f = Interpolant::fit(samples)?;
    let first = samples[0].t_ms;
    let span = samples[samples.len() - 1].t_ms - first;
    let step = 1000.0 / target_hz;
    let n = (span / step + 1e-9).floor() as usize + 1;
    let src = samples[0].src;
    let out = (0..n)
        .map(|j| {
            let t = first + j as f64 * step;
            let (x, y) = f.eval(t);
            GazeSample::new(t, x, y, src)
        })
        .collect();
    Ok(Resampled {
        samples: out,
        method: f.method(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaze::Source;

    fn xs(v: &[f64]) -> Vec<GazeSample> {
        v.iter()
            .enumerate()
            .map(|(i, &x)| GazeSample::new(i as f64 * 10.0, x, -x, Source::Webcam))
            .collect()
    }

    #[test]
    fn moving_average_examples() {
        let s = xs(&[0.0, 10.0, 20.0]);
        let out = moving_average(&s, 3).unwrap();
        assert_eq!(out.iter().map(|s| s.x).collect::<Vec<_>>(), vec![5.0, 10.0, 15.0]);
        assert_eq!(moving_average(&s, 1).unwrap(), s);
        assert!(moving_average(&s, 4).is_err());
        let c = xs(&[0.1; 9]);
        assert_eq!(moving_average(&c, 5).unwrap(), c);
    }

    #[test]
    fn ramp_is_reproduced() {
        let s: Vec<GazeSample> = (0..50)
            .map(|i| {
                let t = i as f64 * 40.0;
                GazeSample::new(t, t, 2.0 * t + 1.0, Source::Webcam)
            })
            .collect();
        let r = resample(&s, 60.0).unwrap();
        assert_eq!(r.method, Interpolation::CubicSpline);
        assert_eq!(r.samples.len(), (1960.0f64 * 0.06).floor() as usize + 1);
        for g in &r.samples {
            assert!((g.x - g.t_ms).abs() < 1e-9);
            assert!((g.y - 2.0 * g.t_ms - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn knots_are_exact() {
        let t = [0.0, 13.0, 40.0, 41.0, 90.0];
        let y = [3.0, -1.0, 7.5, 2.0, 0.25];
        let s = CubicSpline::new(&t, &y).unwrap();
        for i in 0..5 {
            assert_eq!(s.eval(t[i]), y[i]);
        }
    }

    #[test]
    fn few_samples_fall_back_to_linear() {
        let r = resample(&xs(&[0.0, 10.0, 30.0]), 200.0).unwrap();
        assert_eq!(r.method, Interpolation::Linear);
        assert_eq!(r.samples.len(), 5);
        assert_eq!(r.samples[1].x, 5.0);
        assert_eq!(r.samples[3].x, 20.0);
    }

    #[test]
    fn unsorted_is_an_error() {
        let mut s = xs(&[1.0, 2.0, 3.0, 4.0]);
        s[2].t_ms = s[1].t_ms;
        assert!(matches!(resample(&s, 60.0), Err(CoreError::NonMonotonic { index: 2 })));
    }
}
