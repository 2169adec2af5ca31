use lexgaze_tensor::{Adam, LrGroup, ParamStore, Tape, Tensor};
use serde::{Deserialize, Serialize};

use crate::dataset::CandidateWord;
use crate::error::{CoreError, Result};
use crate::model::focal_loss;
use crate::text::{NerTag, PosTag};

/// d, t, log-tf, POS one-hot, NER one-hot.
pub const LOGISTIC_FEATURES: usize = 3 + PosTag::COUNT + NerTag::COUNT;

const STEPS: usize = 400;
const LR: f64 = 0.05;

pub fn logistic_features(w: &CandidateWord) -> [f64; LOGISTIC_FEATURES] {
    let mut f = [0.0; LOGISTIC_FEATURES];
    f[0] = w.distance;
    f[1] = w.duration as f64;
    f[2] = w.knowledge.log_term_frequency;
    f[3 + w.knowledge.pos_tag.index()] = 1.0;
    f[3 + PosTag::COUNT + w.knowledge.ner_tag.index()] = 1.0;
    f
}

/// Standardized logistic regression fit by full-batch Adam on the
/// cross-entropy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticModel {
    pub fn fit(x: &[[f64; LOGISTIC_FEATURES]], y: &[bool]) -> Result<Self> {
        let n = x.len();
        let pos = y.iter().filter(|&&v| v).count();
        if n == 0 || pos == 0 || pos == n {
            return Err(CoreError::Degenerate(format!("{pos} positives among {n} samples")));
        }
        let k = LOGISTIC_FEATURES;
        let mut mean = vec![0.0; k];
        let mut scale = vec![0.0; k];
        for row in x {
            for j in 0..k {
                mean[j] += row[j] / n as f64;
            }
        }
        for row in x {
            for j in 0..k {
                scale[j] += (row[j] - mean[j]).powi(2) / n as f64;
            }
        }
        for s in &mut scale {
            *s = if *s > 1e-12 { s.sqrt() } else { 1.0 };
        }
        let data: Vec<f64> = x.iter().flat_map(|r| (0..k).map(|j| (r[j] - mean[j]) / scale[j]).collect::<Vec<_>>()).collect();
        let xt = Tensor::new(vec![n, k], data)?;
        let labels: Vec<f64> = y.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect();
        let mask = vec![true; n];
        let mut store = ParamStore::new();
        let w = store.add("w", LrGroup::EncoderDecoder, Tensor::zeros(&[k, 1]))?;
        let b = store.add("b", LrGroup::EncoderDecoder, Tensor::zeros(&[1]))?;
        let mut opt = Adam::new(LR, LR);
        for _ in 0..STEPS {
            let tape = Tape::new();
            let xv = tape.constant(xt.clone());
            let p = xv.matmul(tape.param(&store, w))?.add(tape.param(&store, b))?.sigmoid();
            // α = 0.5, γ = 0 is half the binary cross-entropy
            let loss = focal_loss(&tape, p, &labels, &mask, 0.5, 0.0)?;
            let grads = tape.backward(loss)?;
            store.zero_grad();
            store.accumulate(&grads);
            opt.step(&mut store)?;
        }
        Ok(Self {
            mean,
            scale,
            weights: store.get(w).value.data().to_vec(),
            bias: store.get(b).value.data()[0],
        })
    }

    pub fn predict_proba(&self, f: &[f64; LOGISTIC_FEATURES]) -> f64 {
        let z: f64 = self.bias
            + (0..LOGISTIC_FEATURES).map(|j| self.weights[j] * (f[j] - self.mean[j]) / self.scale[j]).sum::<f64>();
        1.0 / (1.0 + (-z).exp())
    }
}
