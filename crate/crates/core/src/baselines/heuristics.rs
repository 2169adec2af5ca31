use serde::{Deserialize, Serialize};

use crate::eval::{Confusion, THRESHOLD_STEPS};

/// Which side of the threshold is positive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `value ≤ θ`
    AtMost,
    /// `value ≥ θ`
    AtLeast,
}

impl Direction {
    pub fn predict(self, value: f64, theta: f64) -> bool {
        match self {
            Direction::AtMost => value <= theta,
            Direction::AtLeast => value >= theta,
        }
    }
}

/// A threshold picked from the 101-point grid stretched over `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridThreshold {
    pub direction: Direction,
    pub theta: f64,
    pub lo: f64,
    pub hi: f64,
}

impl GridThreshold {
    pub fn predict(&self, value: f64) -> bool {
        self.direction.predict(value, self.theta)
    }
}

/// Grid calibration on `(values, labels)`: θ_k = lo + k/100·(hi − lo) over
/// the observed range, maximizing F1, ties to the smallest θ.
pub fn calibrate_grid(values: &[f64], labels: &[bool], direction: Direction) -> GridThreshold {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (0.0, 0.0) };
    let mut best = (f64::NEG_INFINITY, lo);
    for k in 0..THRESHOLD_STEPS {
        let theta = lo + (hi - lo) * k as f64 / 100.0;
        let c = Confusion::from_predictions(values.iter().zip(labels).map(|(&v, &y)| (direction.predict(v, theta), y)));
        if c.f1() > best.0 {
            best = (c.f1(), theta);
        }
    }
    GridThreshold {
        direction,
        theta: best.1,
        lo,
        hi,
    }
}

/// `d(g, word) ≤ θ_d` over word-level distances.
pub fn distance_heuristic(distances: &[f64], theta_d: f64) -> Vec<bool> {
    distances.iter().map(|&d| Direction::AtMost.predict(d, theta_d)).collect()
}

/// `t(g, word) ≥ θ_t` over word-level in-box sample counts.
pub fn fixation_heuristic(durations: &[f64], theta_t: f64) -> Vec<bool> {
    durations.iter().map(|&t| Direction::AtLeast.predict(t, theta_t)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extremes() {
        let d = [3.0, 50.0, 0.0];
        assert!(distance_heuristic(&d, f64::INFINITY).iter().all(|&p| p));
        assert_eq!(distance_heuristic(&d, 0.0), vec![false, false, true]);
        let t = [0.0, 4.0, 9.0];
        assert!(fixation_heuristic(&t, 0.0).iter().all(|&p| p));
        assert!(fixation_heuristic(&t, 10.0).iter().all(|&p| !p));
    }

    #[test]
    fn calibration_finds_separating_cut() {
        let t = [1.0, 2.0, 3.0, 10.0, 12.0];
        let y = [false, false, false, true, true];
        let g = calibrate_grid(&t, &y, Direction::AtLeast);
        assert!(g.theta > 3.0 && g.theta <= 10.0, "{g:?}");
        assert_eq!(t.iter().map(|&v| g.predict(v)).collect::<Vec<_>>(), y);
    }
}
