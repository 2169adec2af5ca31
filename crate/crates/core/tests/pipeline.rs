use std::collections::{BTreeMap, HashSet};
use std::sync::{Arc, OnceLock};
use std::thread;

use lexgaze_core::baselines::{calibrate_grid, logistic_features, Direction, LogisticModel};
use lexgaze_core::dataset::{from_synth, split, text_resources, Dataset, SplitMode, SplitSpec, TextContext, WindowExample};
use lexgaze_core::eval::{metrics_at, run_suite, score_windows, Method, RowStatus, SuiteConfig, SuiteData};
use lexgaze_core::gaze::Source;
use lexgaze_core::model::{DetectorModel, ModelConfig};
use lexgaze_core::session::{replay, Detector, Session};
use lexgaze_core::synth::{generate, SynthConfig, SynthDataset};
use lexgaze_core::text::{FrequencyTable, Vocabulary};
use lexgaze_core::train::{train, TrainConfig};
use lexgaze_core::CoreError;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Fixture {
    ds: SynthDataset,
    vocab: Vocabulary,
    freq: FrequencyTable,
    model: ModelConfig,
    tracker: Dataset,
}

fn small_synth() -> SynthConfig {
    let mut c = SynthConfig::default();
    c.users = 3;
    c.corpus.n_docs = 4;
    c.corpus.words_per_doc = 150;
    c.lexicon.content_words = 2000;
    c
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let ds = generate(&small_synth()).unwrap();
        let (vocab, freq) = text_resources(&ds.layouts).unwrap();
        let model = ModelConfig {
            d_model: 16,
            n_heads: 2,
            n_enc_layers: 1,
            n_dec_layers: 1,
            n_text_layers: 1,
            gaze_hz: 15.0,
            max_gaze_len: 45,
            max_tokens: 32,
            vocab_size: vocab.len(),
            seed: 1,
            ..Default::default()
        };
        let tracker = from_synth(&ds, Source::Tracker, TextContext { vocab: &vocab, freq: &freq }, &model).unwrap();
        Fixture {
            ds,
            vocab,
            freq,
            model,
            tracker,
        }
    })
}

fn parts(f: &Fixture) -> (Vec<&WindowExample>, Vec<&WindowExample>) {
    let s = split(&f.tracker.windows, &SplitSpec::new(SplitMode::Mixed, 1)).unwrap();
    let pick = |ix: &[usize]| ix.iter().map(|&i| &f.tracker.windows[i]).collect::<Vec<_>>();
    (pick(&s.train), pick(&s.dev))
}

fn quick(epochs: usize, patience: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        patience,
        lr_encoder_decoder: 3e-3,
        lr_backbone: 3e-3,
        seed: 4,
        ..Default::default()
    }
}

#[test]
fn zero_patience_runs_one_epoch() {
    let f = fixture();
    let (tr, dev) = parts(f);
    let out = train(DetectorModel::new(f.model.clone()).unwrap(), &tr, &dev, &quick(5, 0), None).unwrap();
    assert_eq!(out.log.len(), 1);
    assert_eq!(out.best_epoch, 0);
}

#[test]
fn training_is_deterministic_and_loss_falls() {
    let f = fixture();
    let (tr, dev) = parts(f);
    let mut sink = Vec::new();
    let a = train(DetectorModel::new(f.model.clone()).unwrap(), &tr, &dev, &quick(3, 3), Some(&mut sink)).unwrap();
    let b = train(DetectorModel::new(f.model.clone()).unwrap(), &tr, &dev, &quick(3, 3), None).unwrap();
    assert_eq!(a.log, b.log);
    assert_eq!(a.model.threshold, b.model.threshold);
    assert_eq!(score_windows(&a.model, &dev).unwrap(), score_windows(&b.model, &dev).unwrap());
    assert_eq!(String::from_utf8(sink).unwrap().lines().count(), a.log.len());
    for w in a.log.windows(2) {
        assert!(w[1].loss <= w[0].loss, "{:?}", a.log);
    }
}

#[test]
fn bad_training_config_is_rejected() {
    let f = fixture();
    let (tr, dev) = parts(f);
    let r = train(DetectorModel::new(f.model.clone()).unwrap(), &tr, &dev, &quick(2, 3), None);
    assert!(matches!(r, Err(CoreError::Invalid(_))));
    let r = train(DetectorModel::new(f.model.clone()).unwrap(), &tr, &[], &quick(2, 1), None);
    assert!(matches!(r, Err(CoreError::Empty(_))));
}

fn detector(threshold: f64) -> Arc<Detector> {
    let f = fixture();
    let mut model = DetectorModel::new(f.model.clone()).unwrap();
    model.threshold = threshold;
    Arc::new(Detector {
        model,
        vocab: f.vocab.clone(),
        freq: f.freq.clone(),
    })
}

#[test]
fn replay_matches_offline_scores() {
    let f = fixture();
    let det = detector(0.5);
    for u in &f.ds.users {
        let layout = &f.ds.layouts[0];
        let stream = f.ds.stream(&u.user_id, &layout.doc_id, Source::Tracker).unwrap();
        let live = replay(Arc::new(layout.clone()), det.clone(), stream).unwrap();
        let offline: Vec<&WindowExample> = f
            .tracker
            .windows
            .iter()
            .filter(|w| w.user_id == u.user_id && w.doc_id == layout.doc_id)
            .collect();
        let scores = score_windows(&det.model, &offline).unwrap();
        let live_scored: Vec<_> = live.iter().filter(|r| !r.scores.is_empty()).collect();
        assert_eq!(live_scored.len(), offline.len());
        for ((r, w), s) in live_scored.iter().zip(&offline).zip(&scores) {
            assert_eq!(r.window, w.window_index);
            let idx: Vec<usize> = w.samples.iter().map(|s| s.word.word_index).collect();
            assert_eq!(r.scores.iter().map(|p| p.0).collect::<Vec<_>>(), idx);
            assert_eq!(r.scores.iter().map(|p| p.1).collect::<Vec<_>>(), *s);
        }
    }
}

#[test]
fn detections_are_emitted_once_per_word() {
    let f = fixture();
    let layout = &f.ds.layouts[1];
    let stream = f.ds.stream("u0", &layout.doc_id, Source::Tracker).unwrap();
    let out = replay(Arc::new(layout.clone()), detector(0.0), stream).unwrap();
    let mut seen = HashSet::new();
    let mut scored = HashSet::new();
    for r in &out {
        scored.extend(r.scores.iter().map(|s| s.0));
        for d in &r.detections {
            assert!(seen.insert(d.word_index), "word {} emitted twice", d.word_index);
            assert_eq!(d.word, layout.words[d.word_index].text);
        }
    }
    // θ = 0 flags every scored word exactly once
    assert_eq!(seen, scored);
}

#[test]
fn sessions_do_not_interfere() {
    let f = fixture();
    let det = detector(0.5);
    let jobs: Vec<(String, usize)> = vec![("u0".into(), 0), ("u1".into(), 2), ("u2".into(), 3)];
    let solo: Vec<_> = jobs
        .iter()
        .map(|(u, d)| {
            let l = &f.ds.layouts[*d];
            replay(Arc::new(l.clone()), det.clone(), f.ds.stream(u, &l.doc_id, Source::Tracker).unwrap()).unwrap()
        })
        .collect();
    let threaded: Vec<_> = thread::scope(|s| {
        let hs: Vec<_> = jobs
            .iter()
            .map(|(u, d)| {
                let det = det.clone();
                s.spawn(move || {
                    let l = &f.ds.layouts[*d];
                    replay(Arc::new(l.clone()), det, f.ds.stream(u, &l.doc_id, Source::Tracker).unwrap()).unwrap()
                })
            })
            .collect();
        hs.into_iter().map(|h| h.join().unwrap()).collect()
    });
    // interleaved on one thread
    let mut sessions: Vec<Session> = jobs
        .iter()
        .map(|(u, d)| Session::new(format!("{u}/{d}"), Arc::new(f.ds.layouts[*d].clone()), det.clone()))
        .collect();
    let streams: Vec<_> = jobs
        .iter()
        .map(|(u, d)| f.ds.stream(u, &f.ds.layouts[*d].doc_id, Source::Tracker).unwrap())
        .collect();
    let mut inter = vec![Vec::new(); jobs.len()];
    let longest = streams.iter().map(|s| s.len()).max().unwrap();
    for i in 0..longest {
        for (k, s) in streams.iter().enumerate() {
            if let Some(&g) = s.get(i) {
                inter[k].extend(sessions[k].push(g).unwrap());
            }
        }
    }
    for (k, s) in sessions.iter_mut().enumerate() {
        inter[k].extend(s.finish().unwrap());
    }
    let strip = |v: &Vec<Vec<lexgaze_core::session::WindowResult>>| {
        v.iter()
            .map(|rs| rs.iter().map(|r| (r.window, r.scores.clone(), r.detections.clone())).collect::<Vec<_>>())
            .collect::<Vec<_>>()
    };
    assert_eq!(strip(&solo), strip(&threaded));
    assert_eq!(strip(&solo), strip(&inter));
}

#[test]
fn session_rejects_time_going_backwards() {
    let f = fixture();
    let l = &f.ds.layouts[0];
    let stream = f.ds.stream("u0", &l.doc_id, Source::Tracker).unwrap();
    let mut s = Session::new("x", Arc::new(l.clone()), detector(0.5));
    s.push(stream[10]).unwrap();
    assert!(matches!(s.push(stream[5]), Err(CoreError::NonMonotonic { .. })));
    let mut bad = stream[11];
    bad.x = f64::NAN;
    assert!(s.push(bad).is_err());
    s.push(stream[11]).unwrap();
}

#[test]
fn logistic_separates_a_separable_toy() {
    let f = fixture();
    let samples: Vec<_> = f.tracker.windows.iter().flat_map(|w| &w.samples).take(300).collect();
    // label by a clean cut on dwell
    let median = {
        let mut d: Vec<usize> = samples.iter().map(|s| s.word.duration).collect();
        d.sort();
        d[d.len() / 2]
    };
    let x: Vec<_> = samples.iter().map(|s| logistic_features(&s.word)).collect();
    let y: Vec<bool> = samples.iter().map(|s| s.word.duration > median).collect();
    assert!(y.iter().any(|&b| b) && y.iter().any(|&b| !b));
    let m = LogisticModel::fit(&x, &y).unwrap();
    let p: Vec<f64> = x.iter().map(|f| m.predict_proba(f)).collect();
    let best = (0..=100).map(|k| metrics_at(&p, &y, k as f64 / 100.0).f1).fold(0.0, f64::max);
    assert_eq!(best, 100.0);
    assert!(LogisticModel::fit(&x, &vec![false; x.len()]).is_err());
}

#[test]
fn fixation_beats_shuffled_labels() {
    let f = fixture();
    let samples: Vec<_> = f.tracker.windows.iter().flat_map(|w| &w.samples).collect();
    let t: Vec<f64> = samples.iter().map(|s| s.word.duration as f64).collect();
    let y: Vec<bool> = samples.iter().map(|s| s.unknown).collect();
    let f1 = |labels: &[bool]| {
        let g = calibrate_grid(&t, labels, Direction::AtLeast);
        let pred: Vec<f64> = t.iter().map(|&v| if g.predict(v) { 1.0 } else { 0.0 }).collect();
        metrics_at(&pred, labels, 0.5).f1
    };
    let real = f1(&y);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut perm = y.clone();
    let null: Vec<f64> = (0..5)
        .map(|_| {
            perm.shuffle(&mut rng);
            f1(&perm)
        })
        .collect();
    let null_max = null.iter().cloned().fold(0.0, f64::max);
    assert!(real > null_max + 2.0, "real {real:.2}, shuffled {null:?}");
}

#[test]
fn suite_has_one_row_per_method_and_mode() {
    let f = fixture();
    let cfg = SuiteConfig {
        modes: SplitMode::ALL.to_vec(),
        methods: vec![Method::Distance, Method::Fixation, Method::NGram(2), Method::Svm],
        model: f.model.clone(),
        train: quick(1, 1),
        split_seed: 1,
        embedding_window: 2,
    };
    let run = run_suite(
        SuiteData {
            windows: &f.tracker.windows,
            layouts: &f.ds.layouts,
            vocab: &f.vocab,
        },
        &cfg,
    )
    .unwrap();
    let rows = &run.report.rows;
    assert_eq!(rows.len(), 12);
    let keys: BTreeMap<(String, &str), &RowStatus> =
        rows.iter().map(|r| ((r.method.clone(), r.mode.name()), &r.status)).collect();
    assert_eq!(keys.len(), 12);
    for r in rows {
        if r.method == "svm" {
            assert_eq!(r.status, RowStatus::External);
            assert!(r.test.is_none());
        } else {
            assert_eq!(r.status, RowStatus::Ok, "{} {:?}: {:?}", r.method, r.mode, r.error);
            let m = r.test.as_ref().unwrap();
            assert!((0.0..=100.0).contains(&m.f1));
        }
    }
}
