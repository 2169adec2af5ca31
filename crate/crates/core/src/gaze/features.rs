use super::{GazeSample, Interpolant};
use crate::error::{CoreError, Result};
use crate::geometry::BoundingBox;

/// Distance from the mean gaze point to the box center.
pub fn gaze_token_distance(extended: &[GazeSample], b: &BoundingBox) -> Result<f64> {
    if extended.is_empty() {
        return Err(CoreError::Empty("gaze samples"));
    }
    let n = extended.len() as f64;
    let mut sx = 0.0;
    let mut sy = 0.0;
    for s in extended {
        sx += s.x;
        sy += s.y;
    }
    let dx = sx / n - (b.x_min + b.x_max) / 2.0;
    let dy = sy / n - (b.y_min + b.y_max) / 2.0;
    Ok((dx * dx + dy * dy).sqrt())
}

/// Number of samples inside the box (edges inclusive).
pub fn gaze_duration(extended: &[GazeSample], b: &BoundingBox) -> usize {
    extended.iter().filter(|s| b.contains(s.x, s.y)).count()
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Per-axis median absolute error of `noisy` against `reference`, after
/// interpolating `noisy` at the reference timestamps it spans.
pub fn gaze_mae(reference: &[GazeSample], noisy: &[GazeSample]) -> Result<(f64, f64)> {
    if reference.is_empty() || noisy.is_empty() {
        return Err(CoreError::Empty("gaze stream"));
    }
    let f = Interpolant::fit(noisy)?;
    let (lo, hi) = (noisy[0].t_ms, noisy[noisy.len() - 1].t_ms);
    let (mut ex, mut ey) = (Vec::new(), Vec::new());
    for r in reference.iter().filter(|r| r.t_ms >= lo && r.t_ms <= hi) {
        let (x, y) = f.eval(r.t_ms);
        ex.push((x - r.x).abs());
        ey.push((y - r.y).abs());
    }
    if ex.is_empty() {
        return Err(CoreError::NoOverlap);
    }
    Ok((median(&mut ex), median(&mut ey)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaze::Source;

    fn pts(p: &[(f64, f64)]) -> Vec<GazeSample> {
        p.iter()
            .enumerate()
            .map(|(i, &(x, y))| GazeSample::new(i as f64 * 16.0, x, y, Source::Tracker))
            .collect()
    }

    #[test]
    fn distance_examples() {
        let b = BoundingBox::new(0.0, 0.0, 40.0, 40.0);
        assert_eq!(gaze_token_distance(&pts(&[(10.0, 20.0), (30.0, 20.0)]), &b).unwrap(), 0.0);
        let b = BoundingBox::new(30.0, 0.0, 50.0, 20.0);
        let d = gaze_token_distance(&pts(&[(90.0, 40.0), (110.0, 60.0)]), &b).unwrap();
        assert!((d - 72.111_025_509_279_79).abs() < 1e-12);
        assert!(gaze_token_distance(&[], &b).is_err());
    }

    #[test]
    fn duration_is_inclusive() {
        let b = BoundingBox::new(0.0, 0.0, 10.0, 10.0);
        assert_eq!(gaze_duration(&pts(&[(0.0, 0.0), (10.0, 10.0), (5.0, 10.1)]), &b), 2);
    }

    #[test]
    fn mae_examples() {
        let a = pts(&[(0.0, 0.0), (5.0, 1.0), (9.0, 4.0), (2.0, 2.0), (7.0, 7.0)]);
        assert_eq!(gaze_mae(&a, &a).unwrap(), (0.0, 0.0));
        let shifted: Vec<GazeSample> = a.iter().map(|s| GazeSample { x: s.x + 10.0, ..*s }).collect();
        let (mx, my) = gaze_mae(&a, &shifted).unwrap();
        assert!((mx - 10.0).abs() < 1e-12 && my.abs() < 1e-12);
        let late: Vec<GazeSample> = a.iter().map(|s| GazeSample { t_ms: s.t_ms + 1e4, ..*s }).collect();
        assert!(matches!(gaze_mae(&a, &late), Err(CoreError::NoOverlap)));
    }
}
