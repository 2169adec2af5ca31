//! Count-based unit embeddings: positive PMI of unit co-occurrences in the
//! corpus, factored by subspace iteration. Used to initialize the text
//! encoder's embedding table in place of external pretrained vectors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layout::DocumentLayout;
use super::vocab::{tokenize, Vocabulary};
use crate::error::{invalid, Result};

/// Root-mean-square of the returned table.
pub const EMBEDDING_RMS: f64 = 0.1;

const ITERATIONS: usize = 40;

/// One row per vocabulary id, `dim` wide. Units that never occur get zero
/// rows.
pub fn cooccurrence_embeddings(
    corpus: &[DocumentLayout],
    vocab: &Vocabulary,
    dim: usize,
    window: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let v = vocab.len();
    if dim == 0 || dim > v {
        return invalid(format!("embedding width {dim} must be in 1..={v}"));
    }
    let mut counts = vec![0.0f64; v * v];
    for doc in corpus {
        let mut ids = Vec::new();
        for w in &doc.words {
            ids.extend(tokenize(w, vocab)?.into_iter().map(|t| t.token_id as usize));
        }
        for (i, &a) in ids.iter().enumerate() {
            for &b in &ids[i + 1..(i + 1 + window).min(ids.len())] {
                counts[a * v + b] += 1.0;
                counts[b * v + a] += 1.0;
            }
        }
    }
    let row: Vec<f64> = counts.chunks(v).map(|r| r.iter().sum()).collect();
    let total: f64 = row.iter().sum();
    if total == 0.0 {
        return invalid("corpus has no co-occurrences");
    }
    let mut ppmi = vec![0.0; v * v];
    for a in 0..v {
        for b in 0..v {
            let c = counts[a * v + b];
            if c > 0.0 {
                ppmi[a * v + b] = (c * total / (row[a] * row[b])).ln().max(0.0);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<Vec<f64>> = (0..dim).map(|_| (0..v).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    orthonormalize(&mut q);
    for _ in 0..ITERATIONS {
        q = q.iter().map(|col| sym_mul(&ppmi, v, col)).collect();
        orthonormalize(&mut q);
    }
    let scales: Vec<f64> =
        q.iter().map(|col| dot(col, &sym_mul(&ppmi, v, col)).abs().sqrt()).collect();
    let mut out: Vec<Vec<f64>> = (0..v).map(|i| (0..dim).map(|j| q[j][i] * scales[j]).collect()).collect();
    let rms = (out.iter().flatten().map(|x| x * x).sum::<f64>() / (v * dim) as f64).sqrt();
    if rms > 0.0 {
        out.iter_mut().flatten().for_each(|x| *x *= EMBEDDING_RMS / rms);
    }
    Ok(out)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sym_mul(m: &[f64], v: usize, x: &[f64]) -> Vec<f64> {
    m.chunks(v).map(|r| dot(r, x)).collect()
}

/// Modified Gram–Schmidt; a column that collapses is left at zero.
fn orthonormalize(cols: &mut [Vec<f64>]) {
    for j in 0..cols.len() {
        for k in 0..j {
            let (done, rest) = cols.split_at_mut(j);
            let p = dot(&rest[0], &done[k]);
            rest[0].iter_mut().zip(&done[k]).for_each(|(a, b)| *a -= p * b);
        }
        let n = dot(&cols[j], &cols[j]).sqrt();
        if n > 1e-12 {
            cols[j].iter_mut().for_each(|a| *a /= n);
        } else {
            cols[j].iter_mut().for_each(|a| *a = 0.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::{build_vocabulary, VocabConfig};
    use crate::text::layout::tests::line;

    #[test]
    fn shape_scale_and_determinism() {
        let docs = vec![line(&["red", "apple", "green", "apple", "red", "pear", "green", "pear", "red", "apple"]); 3];
        let vocab = build_vocabulary(&docs, &VocabConfig::default()).unwrap();
        let a = cooccurrence_embeddings(&docs, &vocab, 3, 2, 1).unwrap();
        assert_eq!(a.len(), vocab.len());
        assert!(a.iter().all(|r| r.len() == 3));
        let rms = (a.iter().flatten().map(|x| x * x).sum::<f64>() / (3 * a.len()) as f64).sqrt();
        assert!((rms - EMBEDDING_RMS).abs() < 1e-12);
        assert_eq!(a, cooccurrence_embeddings(&docs, &vocab, 3, 2, 1).unwrap());
    }
}
