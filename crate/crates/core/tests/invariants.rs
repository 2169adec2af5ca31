use lexgaze_core::eval::jaccard;
use lexgaze_core::gaze::{
    gaze_duration, gaze_token_distance, moving_average, reject_or_denoise, segment_windows, CubicSpline, GazeSample, Source,
};
use lexgaze_core::model::focal_term;
use lexgaze_core::text::{build_vocabulary, tokenize, DocumentLayout, FrequencyTable, LayoutWord, VocabConfig};
use lexgaze_core::BoundingBox;
use proptest::prelude::*;

/// Time-sorted stream from positive increments.
fn stream() -> impl Strategy<Value = Vec<GazeSample>> {
    prop::collection::vec((0.0f64..90.0, 0.0f64..1000.0, 0.0f64..800.0), 1..120).prop_map(|v| {
        let mut t = 0.0;
        v.into_iter()
            .map(|(dt, x, y)| {
                t += dt;
                GazeSample::new(t, x, y, Source::Tracker)
            })
            .collect()
    })
}

fn bbox() -> impl Strategy<Value = BoundingBox> {
    (0.0f64..900.0, 0.0f64..700.0, 1.0f64..200.0, 1.0f64..60.0).prop_map(|(x, y, w, h)| BoundingBox::new(x, y, x + w, y + h))
}

proptest! {
    #[test]
    fn windows_tile_the_stream(s in stream()) {
        let ws = segment_windows(&s, 1000.0);
        let last = s.last().unwrap().t_ms;
        prop_assert_eq!(ws.len(), (last / 1000.0).floor() as usize);
        for (k, w) in ws.iter().enumerate() {
            prop_assert_eq!(w.index, k);
            prop_assert_eq!(w.start_ms, k as f64 * 1000.0);
            prop_assert!(w.core.iter().all(|g| g.t_ms >= w.start_ms && g.t_ms < w.end_ms()));
            let ext = w.extended();
            prop_assert_eq!(ext.len(), w.n_g());
            prop_assert!(ext.windows(2).all(|p| p[0].t_ms <= p[1].t_ms));
            prop_assert!(ext.iter().all(|g| g.t_ms >= w.start_ms - 1000.0 && g.t_ms < w.end_ms() + 1000.0));
        }
        // cores partition the covered span
        let covered = s.iter().filter(|g| g.t_ms < ws.len() as f64 * 1000.0).count();
        prop_assert_eq!(ws.iter().map(|w| w.core.len()).sum::<usize>(), covered);
    }

    #[test]
    fn denoising_only_removes_samples(s in stream(), lh in 10.0f64..30.0) {
        for w in segment_windows(&s, 1000.0) {
            let d = reject_or_denoise(&w, lh);
            prop_assert!(d.core.len() <= w.core.len());
            prop_assert!(d.core.iter().all(|g| w.core.contains(g)));
            prop_assert!(d.extended().iter().all(|g| w.extended().contains(g)));
        }
    }

    #[test]
    fn moving_average_keeps_length_times_and_range(s in stream(), half in 0usize..4) {
        let out = moving_average(&s, 2 * half + 1).unwrap();
        prop_assert_eq!(out.len(), s.len());
        let (lo, hi) = s.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), g| (a.min(g.x), b.max(g.x)));
        for (a, b) in out.iter().zip(&s) {
            prop_assert_eq!(a.t_ms, b.t_ms);
            prop_assert!(a.x >= lo && a.x <= hi);
        }
    }

    #[test]
    fn spline_passes_through_its_knots(ys in prop::collection::vec(-500.0f64..500.0, 2..30), dt in 1.0f64..40.0) {
        let ts: Vec<f64> = (0..ys.len()).map(|i| i as f64 * dt).collect();
        let sp = CubicSpline::new(&ts, &ys).unwrap();
        for (t, y) in ts.iter().zip(&ys) {
            prop_assert!((sp.eval(*t) - y).abs() < 1e-9);
        }
    }

    #[test]
    fn gaze_features_are_bounded(s in stream(), b in bbox(), grow in 0.0f64..50.0) {
        prop_assert!(gaze_token_distance(&s, &b).unwrap() >= 0.0);
        let n = gaze_duration(&s, &b);
        prop_assert!(n <= s.len());
        let bigger = BoundingBox::new(b.x_min - grow, b.y_min - grow, b.x_max + grow, b.y_max + grow);
        prop_assert!(gaze_duration(&s, &bigger) >= n);
    }

    #[test]
    fn focal_loss_is_nonnegative(p in 1e-9f64..1.0, y in any::<bool>(), alpha in 0.0f64..=1.0, gamma in 0.0f64..5.0) {
        prop_assert!(focal_term(p, y as u8 as f64, alpha, gamma) >= 0.0);
    }

    #[test]
    fn jaccard_is_a_similarity(a in prop::collection::hash_set(0u8..20, 0..10), b in prop::collection::hash_set(0u8..20, 0..10)) {
        let j = jaccard(&a, &b);
        prop_assert!((0.0..=1.0).contains(&j));
        prop_assert_eq!(j, jaccard(&b, &a));
        prop_assert_eq!(jaccard(&a, &a), 1.0);
    }

    #[test]
    fn tf_bins_are_monotone(a in 0.0f64..15.0, b in 0.0f64..15.0) {
        let f = FrequencyTable::from_counts([("x".to_string(), 5000u64)].into());
        let (lo, hi) = (a.min(b), a.max(b));
        prop_assert!(f.tf_bin(lo) <= f.tf_bin(hi));
    }

    #[test]
    fn tokens_rebuild_their_word(
        words in prop::collection::vec("[\"(]?[A-Za-z]{1,12}[.,;:!?)\"]{0,2}", 1..30),
        probe in "[\"(]?[A-Za-z]{1,12}[.,;:!?)\"]{0,2}",
        x0 in 0.0f64..500.0,
    ) {
        let layout = |ws: &[String]| DocumentLayout {
            doc_id: "d".into(),
            line_height: 20.0,
            words: ws
                .iter()
                .enumerate()
                .map(|(i, t)| LayoutWord {
                    text: t.clone(),
                    bbox: BoundingBox::new(8.0 * i as f64, 0.0, 8.0 * i as f64 + 7.0, 20.0),
                    line_index: 0,
                })
                .collect(),
            columns: vec![],
        };
        let vocab = build_vocabulary(&[layout(&words)], &VocabConfig { max_size: 64, min_count: 1 }).unwrap();
        let w = LayoutWord {
            text: probe.clone(),
            bbox: BoundingBox::new(x0, 100.0, x0 + 7.0 * probe.chars().count() as f64, 120.0),
            line_index: 0,
        };
        let toks = tokenize(&w, &vocab).unwrap();
        prop_assert_eq!(toks.iter().map(|t| t.text.as_str()).collect::<String>(), probe);
        prop_assert!(toks.iter().all(|t| (t.token_id as usize) < vocab.len()));
        prop_assert!((toks[0].bbox.x_min - w.bbox.x_min).abs() < 1e-9);
        prop_assert!((toks[toks.len() - 1].bbox.x_max - w.bbox.x_max).abs() < 1e-9);
        for p in toks.windows(2) {
            prop_assert!((p[0].bbox.x_max - p[1].bbox.x_min).abs() < 1e-9);
        }
    }
}
