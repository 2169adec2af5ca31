//! Mini-batch focal-loss training with dev-F1 early stopping.

use std::io::Write;
use std::time::Instant;

use lexgaze_tensor::{Adam, Tape};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::WindowExample;
use crate::error::{invalid, CoreError, Result};
use crate::eval::{calibrate, MetricsReport};
use crate::model::{focal_loss, DetectorModel, ModelRow, WindowBatch};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_encoder_decoder: f64,
    pub lr_backbone: f64,
    /// Epochs without dev improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 32,
            lr_encoder_decoder: 1e-3,
            lr_backbone: 2e-5,
            patience: 5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Schedule paired with [`ModelConfig::desk`]: the small model needs
    /// the backbone rate raised to the encoder-decoder rate.
    ///
    /// [`ModelConfig::desk`]: crate::model::ModelConfig::desk
    pub fn desk() -> Self {
        Self {
            epochs: 6,
            lr_encoder_decoder: 3e-3,
            lr_backbone: 3e-3,
            patience: 3,
            seed: 1,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return invalid("epochs and batch_size must be positive");
        }
        if !(self.lr_encoder_decoder > 0.0 && self.lr_backbone > 0.0) {
            return invalid("learning rates must be positive");
        }
        if self.patience > self.epochs {
            return invalid(format!("patience {} exceeds epochs {}", self.patience, self.epochs));
        }
        Ok(())
    }
}

/// One line of the run log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub dev_f1: f64,
    pub threshold: f64,
}

pub struct TrainOutcome {
    /// Best-dev parameters with their calibrated threshold.
    pub model: DetectorModel,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_dev: MetricsReport,
    pub seconds: f64,
}

struct TargetRow<'a> {
    row: &'a ModelRow,
    labels: Vec<f64>,
    mask: Vec<bool>,
}

fn target_rows<'a>(windows: &[&'a WindowExample]) -> Vec<TargetRow<'a>> {
    let mut out = Vec::new();
    for w in windows {
        for (row, (labels, mask)) in w.rows.iter().zip(w.token_targets()) {
            if mask.iter().any(|&m| m) {
                out.push(TargetRow { row, labels, mask });
            }
        }
    }
    out
}

/// Trains `model` in place of a copy and returns the best-dev snapshot.
/// Each epoch shuffles rows with a seed derived from `cfg.seed`, so a rerun
/// reproduces the same trajectory. Run-log lines go to `log_sink` as JSON.
pub fn train(
    mut model: DetectorModel,
    train_set: &[&WindowExample],
    dev_set: &[&WindowExample],
    cfg: &TrainConfig,
    mut log_sink: Option<&mut dyn Write>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let rows = target_rows(train_set);
    if rows.is_empty() {
        return Err(CoreError::Empty("training rows"));
    }
    if dev_set.is_empty() {
        return Err(CoreError::Empty("dev set"));
    }
    let (alpha, gamma) = (model.config.alpha, model.config.gamma);
    let mut opt = Adam::new(cfg.lr_encoder_decoder, cfg.lr_backbone);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut best: Option<(DetectorModel, MetricsReport, usize)> = None;
    let mut log = Vec::new();
    for epoch in 0..cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut n_batches = 0;
        for (bi, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let refs: Vec<&ModelRow> = chunk.iter().map(|&i| rows[i].row).collect();
            let batch = WindowBatch::new(&refs, &model.config)?;
            let lt = batch.n_tokens;
            let mut labels = vec![0.0; batch.batch * lt];
            let mut mask = vec![false; batch.batch * lt];
            for (r, &i) in chunk.iter().enumerate() {
                let t = &rows[i];
                labels[r * lt..r * lt + t.labels.len()].copy_from_slice(&t.labels);
                mask[r * lt..r * lt + t.mask.len()].copy_from_slice(&t.mask);
            }
            let tape = Tape::new();
            let p = model.forward(&tape, &batch)?;
            let loss = focal_loss(&tape, p, &labels, &mask, alpha, gamma)?;
            let value = loss.value().item()?;
            if !value.is_finite() {
                return Err(CoreError::NonFiniteLoss { epoch, batch: bi });
            }
            let grads = tape.backward(loss)?;
            model.params.zero_grad();
            model.params.accumulate(&grads);
            opt.step(&mut model.params).map_err(|e| match e {
                lexgaze_tensor::TensorError::NonFiniteGradient(_) => CoreError::NonFiniteLoss { epoch, batch: bi },
                e => e.into(),
            })?;
            loss_sum += value;
            n_batches += 1;
        }
        let (threshold, dev) = calibrate(&model, dev_set)?;
        let entry = EpochLog {
            epoch,
            loss: loss_sum / n_batches as f64,
            dev_f1: dev.f1,
            threshold,
        };
        log::info!("epoch {epoch}: loss {:.5} dev F1 {:.2} θ {:.2}", entry.loss, entry.dev_f1, threshold);
        if let Some(sink) = log_sink.as_deref_mut() {
            serde_json::to_writer(&mut *sink, &entry)?;
            sink.write_all(b"\n")?;
        }
        log.push(entry);
        if best.as_ref().map_or(true, |(_, b, _)| dev.f1 > b.f1) {
            let mut snapshot = model.clone();
            snapshot.threshold = threshold;
            best = Some((snapshot, dev, epoch));
        }
        let since_best = epoch - best.as_ref().map_or(0, |b| b.2);
        if since_best >= cfg.patience {
            break;
        }
    }
    let (model, best_dev, best_epoch) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        model,
        log,
        best_epoch,
        best_dev,
        seconds: start.elapsed().as_secs_f64(),
    })
}
