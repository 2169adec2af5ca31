use std::collections::HashSet;

use lexgaze_core::eval::{jaccard, metrics_at, search_threshold, word_level_metrics, Confusion, MetricsReport};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent F1 of "max token ≥ θ" predictions, straight from counts.
fn brute_counts(token_p: &[f64], owner: &[usize], labels: &[bool], theta: f64) -> (usize, usize, usize, usize) {
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (w, &y) in labels.iter().enumerate() {
        let mut pred = false;
        for (i, &o) in owner.iter().enumerate() {
            if o == w && token_p[i] >= theta {
                pred = true;
            }
        }
        match (pred, y) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    (tp, fp, fn_, tn)
}

fn close(a: f64, b: f64) {
    assert!((a - b).abs() < 1e-9, "{a} vs {b}");
}

fn brute_f1(scores: &[f64], labels: &[bool], theta: f64) -> f64 {
    let mut tp = 0.0;
    let mut fp = 0.0;
    let mut fn_ = 0.0;
    for (s, y) in scores.iter().zip(labels) {
        match (*s >= theta, *y) {
            (true, true) => tp += 1.0,
            (true, false) => fp += 1.0,
            (false, true) => fn_ += 1.0,
            _ => {}
        }
    }
    if tp == 0.0 {
        0.0
    } else {
        2.0 * tp / (2.0 * tp + fp + fn_)
    }
}

fn brute_threshold(scores: &[f64], labels: &[bool]) -> f64 {
    let mut best = (-1.0, 0.0);
    for k in 0..=100 {
        let th = k as f64 / 100.0;
        let f = brute_f1(scores, labels, th);
        if f > best.0 + 1e-12 {
            best = (f, th);
        }
    }
    best.1
}

#[test]
fn random_instances_match_confusion_arithmetic_and_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..200 {
        let n_words = rng.gen_range(1..25);
        let mut owner = Vec::new();
        for w in 0..n_words {
            for _ in 0..rng.gen_range(1..4) {
                owner.push(w);
            }
        }
        // quantized probabilities hit grid points and ties often
        let token_p: Vec<f64> = owner.iter().map(|_| rng.gen_range(0..=40) as f64 / 40.0).collect();
        let labels: Vec<bool> = (0..n_words).map(|_| rng.gen_bool(0.3)).collect();
        let theta = rng.gen_range(0..=100) as f64 / 100.0;
        let map: Vec<Option<usize>> = owner.iter().map(|&o| Some(o)).collect();
        let m = word_level_metrics(&token_p, theta, &map, &labels).unwrap();
        let (tp, fp, fn_, tn) = brute_counts(&token_p, &owner, &labels, theta);
        assert_eq!(m.confusion, Confusion { tp, fp, fn_, tn }, "case {case}");
        let total = (tp + fp + fn_ + tn) as f64;
        close(m.accuracy, 100.0 * (tp + tn) as f64 / total);
        if tp + fp > 0 {
            close(m.precision, 100.0 * tp as f64 / (tp + fp) as f64);
        }
        if tp + fn_ > 0 {
            close(m.recall, 100.0 * tp as f64 / (tp + fn_) as f64);
        }
        if fp + tn > 0 {
            close(m.false_alarm_rate, fp as f64 / (fp + tn) as f64);
        }

        let scores: Vec<f64> = (0..n_words)
            .map(|w| owner.iter().zip(&token_p).filter(|(o, _)| **o == w).map(|(_, p)| *p).fold(0.0, f64::max))
            .collect();
        assert_eq!(search_threshold(&scores, &labels), brute_threshold(&scores, &labels), "case {case}");
    }
}

#[test]
fn hand_built_dev_set_peaks_at_030() {
    // positives at 0.30–0.50, one negative above them at 0.55: θ = 0.30
    // keeps all three positives with a single false alarm, F1 = 6/7
    let scores = [0.30, 0.42, 0.50, 0.05, 0.10, 0.12, 0.20, 0.25, 0.29, 0.55];
    let labels = [true, true, true, false, false, false, false, false, false, false];
    for k in 0..=100 {
        let th = k as f64 / 100.0;
        let f = brute_f1(&scores, &labels, th);
        if th <= 0.30 + 1e-12 && th > 0.29 {
            assert!((f - 6.0 / 7.0).abs() < 1e-12);
        }
        assert!(f <= 6.0 / 7.0 + 1e-12);
    }
    assert_eq!(search_threshold(&scores, &labels), 0.30);
}

#[test]
fn perfect_separation_picks_smallest_grid_point_above_negatives() {
    let scores = [0.95, 0.91, 0.93, 0.05, 0.1, 0.02];
    let labels = [true, true, true, false, false, false];
    assert_eq!(search_threshold(&scores, &labels), 0.11);
}

#[test]
fn worked_confusion_example() {
    let m = MetricsReport::from_confusion(Confusion { tp: 2, fp: 1, fn_: 1, tn: 96 }, 0.5);
    assert_eq!(format!("{:.1} {:.1} {:.1} {:.0}", m.precision, m.recall, m.f1, m.accuracy), "66.7 66.7 66.7 98");
}

#[test]
fn jaccard_of_overlapping_sets() {
    let a: HashSet<&str> = ["a", "b", "c"].into();
    let b: HashSet<&str> = ["b", "c", "d"].into();
    assert_eq!(jaccard(&a, &b), 0.5);
}

proptest! {
    #[test]
    fn predicted_set_shrinks_as_threshold_grows(
        pairs in prop::collection::vec((0.0f64..1.0, any::<bool>()), 1..40),
        a in 0usize..=100,
        b in 0usize..=100,
    ) {
        let (scores, labels): (Vec<f64>, Vec<bool>) = pairs.into_iter().unzip();
        let (lo, hi) = (a.min(b) as f64 / 100.0, a.max(b) as f64 / 100.0);
        let m_lo = metrics_at(&scores, &labels, lo).confusion;
        let m_hi = metrics_at(&scores, &labels, hi).confusion;
        prop_assert!(m_hi.tp <= m_lo.tp && m_hi.fp <= m_lo.fp);
    }

    #[test]
    fn report_identities(
        pairs in prop::collection::vec((0.0f64..1.0, any::<bool>()), 1..60),
        k in 0usize..=100,
    ) {
        let (scores, labels): (Vec<f64>, Vec<bool>) = pairs.into_iter().unzip();
        let m = metrics_at(&scores, &labels, k as f64 / 100.0);
        let c = m.confusion;
        prop_assert!((m.accuracy - 100.0 * (c.tp + c.tn) as f64 / c.total() as f64).abs() < 1e-9);
        if m.precision + m.recall > 0.0 {
            let f = 2.0 * m.precision * m.recall / (m.precision + m.recall);
            prop_assert!((m.f1 - f).abs() < 1e-9);
        }
        prop_assert!((m.correctly_triggered_rate * 100.0 - m.recall).abs() < 1e-9);
        prop_assert!((0.0..=1.0).contains(&m.false_alarm_rate));
        prop_assert!((0.0..=1.0).contains(&m.correctly_triggered_rate));
    }

    #[test]
    fn threshold_search_is_exhaustive_maximum(
        pairs in prop::collection::vec((0usize..=100, any::<bool>()), 1..50),
    ) {
        let scores: Vec<f64> = pairs.iter().map(|p| p.0 as f64 / 100.0).collect();
        let labels: Vec<bool> = pairs.iter().map(|p| p.1).collect();
        prop_assert_eq!(search_threshold(&scores, &labels), brute_threshold(&scores, &labels));
    }
}
