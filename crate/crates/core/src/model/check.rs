//! Finite-difference verification of the whole detector and random
//! inputs for probes and benchmarks.

use lexgaze_tensor::gradcheck::relative_error;
use lexgaze_tensor::Tape;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{focal_loss, DetectorModel, ModelConfig, ModelRow, TokenInput, WindowBatch};
use crate::error::Result;
use crate::text::{NerTag, PosTag, TF_BINS};

/// A small configuration (d_model 16) for gradient checks.
pub fn toy_config(seed: u64) -> ModelConfig {
    ModelConfig {
        d_model: 16,
        n_enc_layers: 1,
        n_dec_layers: 1,
        n_text_layers: 1,
        n_heads: 2,
        ff_mult: 2,
        max_gaze_len: 12,
        max_tokens: 6,
        gaze_hz: 4.0,
        vocab_size: 24,
        seed,
        ..ModelConfig::default()
    }
}

/// Random rows with variable gaze and token lengths.
pub fn random_rows(cfg: &ModelConfig, n: usize, seed: u64) -> Vec<ModelRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let lg = rng.gen_range(cfg.max_gaze_len / 2..=cfg.max_gaze_len).max(1);
            let lt = rng.gen_range(1..=cfg.max_tokens);
            let (cx, cy) = (rng.gen_range(0.2..0.8), rng.gen_range(0.2..0.8));
            ModelRow {
                gaze: (0..lg)
                    .map(|_| {
                        let (x, y) = (cx + rng.gen_range(-0.05..0.05), cy + rng.gen_range(-0.02..0.02));
                        [x, y, x + rng.gen_range(-0.01..0.01), y + rng.gen_range(-0.01..0.01)]
                    })
                    .collect(),
                tokens: (0..lt)
                    .map(|_| {
                        let tf_bin = rng.gen_range(0..TF_BINS);
                        TokenInput {
                            token_id: rng.gen_range(0..cfg.vocab_size) as u32,
                            wx: cx + rng.gen_range(-0.1..0.1),
                            wy: cy + rng.gen_range(-0.02..0.02),
                            d: rng.gen_range(0.0..0.2),
                            t: rng.gen_range(0.0..1.0),
                            tf_bin,
                            pos: rng.gen_range(0..PosTag::COUNT),
                            ner: rng.gen_range(0..NerTag::COUNT),
                            log_tf: tf_bin as f64 * 0.6,
                        }
                    })
                    .collect(),
            }
        })
        .collect()
}

/// Focal loss of `model` on `rows` with every valid token in the loss and
/// deterministic pseudo-labels.
pub fn batch_loss(model: &DetectorModel, batch: &WindowBatch, tape: &Tape) -> Result<f64> {
    let (labels, mask) = pseudo_labels(batch);
    let p = model.forward(tape, batch)?;
    focal_loss(tape, p, &labels, &mask, model.config.alpha, model.config.gamma)?.value().item().map_err(Into::into)
}

fn pseudo_labels(batch: &WindowBatch) -> (Vec<f64>, Vec<bool>) {
    let labels = (0..batch.token_valid.len()).map(|i| if i % 3 == 0 { 1.0 } else { 0.0 }).collect();
    (labels, batch.token_valid.clone())
}

/// Largest relative error between backprop and central differences
/// (step `eps`) over every parameter component, per parameter name.
pub fn detector_gradient_check(model: &DetectorModel, rows: &[ModelRow], eps: f64) -> Result<Vec<(String, f64)>> {
    let refs: Vec<&ModelRow> = rows.iter().collect();
    let batch = WindowBatch::new(&refs, &model.config)?;
    let (labels, mask) = pseudo_labels(&batch);
    let tape = Tape::new();
    let p = model.forward(&tape, &batch)?;
    let loss = focal_loss(&tape, p, &labels, &mask, model.config.alpha, model.config.gamma)?;
    let grads = tape.backward(loss)?;
    let mut probe = model.clone();
    let mut out = Vec::new();
    for (id, param) in model.params.iter() {
        let analytic = grads.param(id).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; param.value.numel()]);
        let mut worst: f64 = 0.0;
        for i in 0..param.value.numel() {
            let orig = param.value.data()[i];
            probe.params.get_mut(id).value.data_mut()[i] = orig + eps;
            let up = batch_loss(&probe, &batch, &Tape::no_grad())?;
            probe.params.get_mut(id).value.data_mut()[i] = orig - eps;
            let down = batch_loss(&probe, &batch, &Tape::no_grad())?;
            probe.params.get_mut(id).value.data_mut()[i] = orig;
            worst = worst.max(relative_error(analytic[i], (up - down) / (2.0 * eps)));
        }
        out.push((param.name.clone(), worst));
    }
    Ok(out)
}
