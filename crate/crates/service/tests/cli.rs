mod common;

use std::collections::BTreeSet;

use common::{artifacts, lexgaze, p};
use lexgaze_core::dataset::WindowExample;
use lexgaze_core::eval::{score_windows, SuiteReport};
use lexgaze_service::cli::main_with;
use lexgaze_service::store;
use serde_json::Value;

#[test]
fn synth_is_reproducible() {
    let a = artifacts();
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| -> Value {
        let out = lexgaze(&["--config", p(&a.config), "--json", "synth", "--seed", "7", "--out", p(&dir.path().join(name))])
            .unwrap();
        serde_json::from_str(&out).unwrap()
    };
    let (x, y) = (run("a"), run("b"));
    assert_eq!(x["hash"], y["hash"]);
    assert_eq!(x["counts"]["users"], 3);
    let z: Value = serde_json::from_str(
        &lexgaze(&["--config", p(&a.config), "--json", "synth", "--seed", "8", "--out", p(&dir.path().join("c"))]).unwrap(),
    )
    .unwrap();
    assert_ne!(x["hash"], z["hash"]);
}

#[test]
fn eval_reports_one_row_per_requested_method() {
    let a = artifacts();
    let out = lexgaze(&[
        "--config", p(&a.config), "--json", "eval", "--dataset", p(&a.dataset), "--mode", "mixed", "--method", "full",
        "--method", "ngram2", "--epochs", "1", "--patience", "1",
    ])
    .unwrap();
    let r: SuiteReport = serde_json::from_str(&out).unwrap();
    assert_eq!(r.rows.len(), 2);
    assert_eq!(r.rows[0].method, "full");
    assert_eq!(r.rows[1].method, "ngram2");
    assert!(r.rows.iter().all(|row| row.test.is_some()));
}

#[test]
fn checkpoint_eval_is_repeatable() {
    let a = artifacts();
    let args = [
        "--config", p(&a.config), "--json", "eval", "--dataset", p(&a.dataset), "--checkpoint", p(&a.checkpoint),
        "--method", "full", "--method", "fixation",
    ];
    let x = lexgaze(&args).unwrap();
    assert_eq!(x, lexgaze(&args).unwrap());
    let r: SuiteReport = serde_json::from_str(&x).unwrap();
    assert_eq!(r.rows.len(), 6);
    assert!(r.rows.iter().all(|row| row.log.is_empty()));
}

#[test]
fn threshold_rewrites_the_checkpoint() {
    let a = artifacts();
    let dir = tempfile::tempdir().unwrap();
    for f in [store::MODEL_FILE, store::VOCAB_FILE, store::FREQ_FILE] {
        std::fs::copy(a.checkpoint.join(f), dir.path().join(f)).unwrap();
    }
    let mut det = store::load_checkpoint(dir.path()).unwrap();
    let calibrated = det.model.threshold;
    det.model.threshold = 0.99;
    store::save_checkpoint(dir.path(), &det.model, &det.vocab, &det.freq).unwrap();
    let out = lexgaze(&["--json", "threshold", "--checkpoint", p(dir.path()), "--dataset", p(&a.dataset)]).unwrap();
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["previous"], 0.99);
    // same split and dev set as training: recovers the trained threshold
    assert_eq!(v["threshold"].as_f64().unwrap(), calibrated);
    assert_eq!(store::load_checkpoint(dir.path()).unwrap().model.threshold, calibrated);
}

#[test]
fn replay_equals_offline_predictions() {
    let a = artifacts();
    let det = store::load_checkpoint(&a.checkpoint).unwrap();
    let data = store::load_dataset(&a.dataset).unwrap();
    for (user, doc) in [("u0", "doc000"), ("u2", "doc003")] {
        let out = lexgaze(&[
            "--json",
            "replay",
            "--checkpoint",
            p(&a.checkpoint),
            "--layout",
            p(&a.synth.join(format!("layouts/{doc}.json"))),
            "--stream",
            p(&a.synth.join(format!("streams/tracker/{user}_{doc}.jsonl"))),
        ])
        .unwrap();
        let live: Vec<(usize, usize)> = out
            .lines()
            .map(|l| {
                let v: Value = serde_json::from_str(l).unwrap();
                assert_eq!(v["type"], "detection");
                (v["window"].as_u64().unwrap() as usize, v["word_index"].as_u64().unwrap() as usize)
            })
            .collect();
        let windows: Vec<&WindowExample> =
            data.dataset.windows.iter().filter(|w| w.user_id == user && w.doc_id == doc).collect();
        let scores = score_windows(&det.model, &windows).unwrap();
        let mut seen = BTreeSet::new();
        let mut offline = Vec::new();
        for (w, s) in windows.iter().zip(&scores) {
            for (sample, &p) in w.samples.iter().zip(s) {
                if p >= det.model.threshold && seen.insert(sample.word.word_index) {
                    offline.push((w.window_index, sample.word.word_index));
                }
            }
        }
        assert_eq!(live, offline, "{user}/{doc}");
    }
}

#[test]
fn latency_is_interactive() {
    let a = artifacts();
    let out = lexgaze(&[
        "--json", "latency", "--checkpoint", p(&a.checkpoint), "--dataset", p(&a.dataset), "--trials", "200",
        "--warmup", "20",
    ])
    .unwrap();
    let v: Value = serde_json::from_str(&out).unwrap();
    let mean = v["mean_ms"].as_f64().unwrap();
    let ratio = v["p95_ms"].as_f64().unwrap() / v["p50_ms"].as_f64().unwrap();
    assert!(mean < 100.0, "mean {mean} ms");
    assert!(ratio < 5.0, "p95/p50 {ratio}");
}

#[test]
fn bad_invocations_fail_with_nonzero_exit() {
    assert_ne!(main_with(["lexgaze", "synth", "--out", "/tmp/x", "--bogus"]), 0);
    assert_ne!(main_with(["lexgaze", "eval", "--dataset", "/nonexistent/dir"]), 0);
    assert_ne!(main_with(["lexgaze", "eval", "--dataset", "/tmp", "--method", "magic"]), 0);
}

#[test]
fn config_path_comes_from_the_environment() {
    let a = artifacts();
    let dir = tempfile::tempdir().unwrap();
    std::env::set_var("LEXGAZE_CONFIG", &a.config);
    let out = lexgaze(&["--json", "synth", "--out", p(dir.path())]);
    std::env::remove_var("LEXGAZE_CONFIG");
    let v: Value = serde_json::from_str(&out.unwrap()).unwrap();
    assert_eq!(v["counts"]["users"], 3);
    assert_eq!(v["counts"]["docs"], 4);
}
