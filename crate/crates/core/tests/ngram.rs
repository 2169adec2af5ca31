use std::collections::BTreeMap;

use lexgaze_core::baselines::{DocText, NGramPredictor};
use lexgaze_core::text::{DocumentLayout, LayoutWord};
use lexgaze_core::BoundingBox;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn layout(id: &str, words: &[String]) -> DocumentLayout {
    DocumentLayout {
        doc_id: id.to_string(),
        line_height: 20.0,
        words: words
            .iter()
            .enumerate()
            .map(|(i, t)| LayoutWord {
                text: t.clone(),
                bbox: BoundingBox::new(10.0 * i as f64, 0.0, 10.0 * i as f64 + 8.0, 14.0),
                line_index: 0,
            })
            .collect(),
        columns: vec![],
    }
}

/// Word `o` positions back from `i`, or `None` once the walk leaves the
/// sentence (the previous word closed a sentence or the text began).
fn back(words: &[String], i: usize, o: usize) -> Option<String> {
    let mut j = i;
    for _ in 0..o {
        if j == 0 {
            return None;
        }
        let prev = &words[j - 1];
        if prev.ends_with('.') || prev.ends_with('!') || prev.ends_with('?') {
            return None;
        }
        j -= 1;
    }
    Some(words[j].trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
}

/// Positive iff some unknown-labeled training occurrence shares the
/// current word and its n − 1 predecessors (padding included).
fn brute(
    docs: &BTreeMap<String, Vec<String>>,
    train: &[(String, usize, bool)],
    doc: &str,
    i: usize,
    n: usize,
) -> bool {
    train.iter().any(|(d, j, unknown)| {
        *unknown && (0..n).all(|o| back(&docs[d], *j, o) == back(&docs[doc], i, o))
    })
}

fn random_words(rng: &mut ChaCha8Rng, len: usize) -> Vec<String> {
    let pool = ["ash", "Bay", "cove", "dune", "elm", "fern", "gale"];
    (0..len)
        .map(|_| {
            let mut w = pool.choose(rng).unwrap().to_string();
            if rng.gen_bool(0.2) {
                w.push('.');
            } else if rng.gen_bool(0.05) {
                w.push(',');
            }
            w
        })
        .collect()
}

#[test]
fn randomized_suite_matches_training_text_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..50 {
        let n_docs = rng.gen_range(2..5);
        let mut raw = BTreeMap::new();
        for d in 0..n_docs {
            let len = rng.gen_range(5..30);
            raw.insert(format!("d{d}"), random_words(&mut rng, len));
        }
        let texts: BTreeMap<String, DocText> =
            raw.iter().map(|(id, w)| (id.clone(), DocText::from_layout(&layout(id, w)))).collect();
        let train: Vec<(String, usize, bool)> = (0..rng.gen_range(1..40))
            .map(|_| {
                let d = format!("d{}", rng.gen_range(0..n_docs));
                let i = rng.gen_range(0..raw[&d].len());
                (d, i, rng.gen_bool(0.3))
            })
            .collect();
        for n in 1..=3 {
            let p = NGramPredictor::fit(n, &texts, train.iter().map(|(d, i, u)| (d.as_str(), *i, *u))).unwrap();
            for (id, words) in &raw {
                for i in 0..words.len() {
                    assert_eq!(
                        p.predict(&texts[id], i),
                        brute(&raw, &train, id, i, n),
                        "case {case}, n {n}, {id}[{i}]"
                    );
                }
            }
        }
    }
}

#[test]
fn hand_built_pair() {
    let train_words: Vec<String> =
        "The quiet harbor held a ferric barge. A ferric tide rose over the quiet harbor wall."
            .split(' ')
            .map(String::from)
            .collect();
    let test_words: Vec<String> = "Ferric dust. The quiet harbor was ferric. a ferric tide"
        .split(' ')
        .map(String::from)
        .collect();
    assert_eq!(train_words.len(), 16);
    let mut raw = BTreeMap::new();
    raw.insert("train".to_string(), train_words.clone());
    raw.insert("test".to_string(), test_words.clone());
    let texts: BTreeMap<String, DocText> =
        raw.iter().map(|(id, w)| (id.clone(), DocText::from_layout(&layout(id, w)))).collect();
    // "ferric" (both), "harbor" (second) unknown
    let train: Vec<(String, usize, bool)> =
        [(5, true), (8, true), (14, true), (2, false)].iter().map(|&(i, u)| ("train".to_string(), i, u)).collect();
    let expect = [
        // unigram: every ferric and harbor
        vec![true, false, false, false, true, false, true, false, true, false],
        // bigram: "a ferric", "quiet harbor"; trigram adds "<s> a ferric", "the quiet harbor"
        vec![false, false, false, false, true, false, false, false, true, false],
        vec![false, false, false, false, true, false, false, false, true, false],
    ];
    for n in 1..=3 {
        let p = NGramPredictor::fit(n, &texts, train.iter().map(|(d, i, u)| (d.as_str(), *i, *u))).unwrap();
        let got: Vec<bool> = (0..test_words.len()).map(|i| p.predict(&texts["test"], i)).collect();
        let oracle: Vec<bool> = (0..test_words.len()).map(|i| brute(&raw, &train, "test", i, n)).collect();
        assert_eq!(got, oracle, "n {n}");
        assert_eq!(got, expect[n - 1], "n {n}");
    }
}

#[test]
fn higher_order_never_hits_more_often() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut raw = BTreeMap::new();
    for d in 0..6 {
        raw.insert(format!("d{d}"), random_words(&mut rng, 60));
    }
    let texts: BTreeMap<String, DocText> =
        raw.iter().map(|(id, w)| (id.clone(), DocText::from_layout(&layout(id, w)))).collect();
    let train: Vec<(String, usize, bool)> =
        (0..60).map(|_| (format!("d{}", rng.gen_range(0..3)), rng.gen_range(0..60), rng.gen_bool(0.3))).collect();
    let mut prev = usize::MAX;
    for n in 1..=3 {
        let p = NGramPredictor::fit(n, &texts, train.iter().map(|(d, i, u)| (d.as_str(), *i, *u))).unwrap();
        let hits: usize = (3..6).map(|d| (0..60).filter(|&i| p.predict(&texts[&format!("d{d}")], i)).count()).sum();
        assert!(hits <= prev, "n {n}: {hits} > {prev}");
        prev = hits;
    }
}
