//! Focal binary cross-entropy.

use lexgaze_tensor::{CustomBackward, Tape, Tensor, Var};

use crate::error::{invalid, Result};

/// Probabilities are clamped to `[P_CLAMP, 1 - P_CLAMP]` before the logs.
pub const P_CLAMP: f64 = 1e-12;

/// Per-token focal loss:
/// `-α·y·(1-p)^γ·ln p - (1-α)·(1-y)·p^γ·ln(1-p)`.
pub fn focal_term(p: f64, y: f64, alpha: f64, gamma: f64) -> f64 {
    let p = p.clamp(P_CLAMP, 1.0 - P_CLAMP);
    -alpha * y * (1.0 - p).powf(gamma) * p.ln() - (1.0 - alpha) * (1.0 - y) * p.powf(gamma) * (1.0 - p).ln()
}

/// d(focal_term)/dp; zero where the clamp is active.
pub fn focal_grad(p: f64, y: f64, alpha: f64, gamma: f64) -> f64 {
    if !(P_CLAMP..=1.0 - P_CLAMP).contains(&p) {
        return 0.0;
    }
    let q = 1.0 - p;
    let pos = if y != 0.0 {
        let dpow = if gamma == 0.0 { 0.0 } else { -gamma * q.powf(gamma - 1.0) };
        -alpha * y * (dpow * p.ln() + q.powf(gamma) / p)
    } else {
        0.0
    };
    let neg = if y != 1.0 {
        let dpow = if gamma == 0.0 { 0.0 } else { gamma * p.powf(gamma - 1.0) };
        -(1.0 - alpha) * (1.0 - y) * (dpow * q.ln() - p.powf(gamma) / q)
    } else {
        0.0
    };
    pos + neg
}

struct FocalBackward {
    labels: Vec<f64>,
    mask: Vec<bool>,
    alpha: f64,
    gamma: f64,
    count: f64,
}

impl CustomBackward for FocalBackward {
    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, grad_out: &[f64]) -> Vec<Vec<f64>> {
        let g = grad_out[0] / self.count;
        let grad = inputs[0]
            .data()
            .iter()
            .zip(&self.labels)
            .zip(&self.mask)
            .map(|((&p, &y), &m)| if m { g * focal_grad(p, y, self.alpha, self.gamma) } else { 0.0 })
            .collect();
        vec![grad]
    }
}

/// Mean focal loss over the positions where `mask` is true.
pub fn focal_loss<'t>(
    tape: &'t Tape,
    p: Var<'t>,
    labels: &[f64],
    mask: &[bool],
    alpha: f64,
    gamma: f64,
) -> Result<Var<'t>> {
    let n = p.with_value(|t| t.numel());
    if labels.len() != n || mask.len() != n {
        return invalid(format!("focal loss: {n} predictions, {} labels, {} mask entries", labels.len(), mask.len()));
    }
    if !(0.0 < alpha && alpha < 1.0) || !(gamma >= 0.0) {
        return invalid(format!("focal loss needs α in (0,1) and γ ≥ 0, got α={alpha}, γ={gamma}"));
    }
    let count = mask.iter().filter(|&&m| m).count();
    if count == 0 {
        return invalid("focal loss: every position is masked");
    }
    let total: f64 = p.with_value(|t| {
        t.data()
            .iter()
            .zip(labels)
            .zip(mask)
            .filter(|(_, &m)| m)
            .map(|((&p, &y), _)| focal_term(p, y, alpha, gamma))
            .sum()
    });
    let value = Tensor::scalar(total / count as f64);
    Ok(tape.custom(
        &[p],
        value,
        Box::new(FocalBackward {
            labels: labels.to_vec(),
            mask: mask.to_vec(),
            alpha,
            gamma,
            count: count as f64,
        }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_value() {
        assert!((focal_term(0.5, 1.0, 0.5, 0.0) - 0.346_573_590_279_972_6).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_differences() {
        for &(p, y, a, g) in &[(0.3, 1.0, 0.9, 2.0), (0.7, 0.0, 0.9, 2.0), (0.2, 0.0, 0.25, 0.0), (0.6, 1.0, 0.5, 1.5)] {
            let h = 1e-6;
            let num = (focal_term(p + h, y, a, g) - focal_term(p - h, y, a, g)) / (2.0 * h);
            assert!((num - focal_grad(p, y, a, g)).abs() < 1e-7, "{p} {y}");
        }
    }

    #[test]
    fn mean_over_unmasked() {
        let tape = Tape::new();
        let p = tape.input(Tensor::from_vec(vec![0.5, 0.9, 0.1]), true);
        let l = focal_loss(&tape, p, &[1.0, 0.0, 1.0], &[true, false, true], 0.5, 0.0).unwrap();
        let want = (focal_term(0.5, 1.0, 0.5, 0.0) + focal_term(0.1, 1.0, 0.5, 0.0)) / 2.0;
        assert_eq!(l.value().item().unwrap(), want);
        let g = tape.backward(l).unwrap().wrt(p).unwrap();
        assert_eq!(g.data()[1], 0.0);
    }
}
