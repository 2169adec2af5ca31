//! Multimodal detector: a gaze encoder, a token decoder that
//! cross-attends into the encoded gaze, a contextual text encoder and
//! word-level knowledge embeddings, concatenated into a per-token
//! logistic head.

mod batch;
pub mod check;
pub mod layers;
pub mod loss;

use std::path::Path;

use lexgaze_tensor::{checkpoint, LrGroup, ParamStore, Tape, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use batch::{ModelRow, TokenInput, WindowBatch};
use layers::{sinusoidal, Builder, DecoderLayer, EncoderLayer, LayerNorm, Linear};
pub use loss::{focal_grad, focal_loss, focal_term};

use crate::error::{invalid, CoreError, Result};
use crate::text::{NerTag, PosTag, TF_BINS};

pub const SCREEN_WIDTH: f64 = 1512.0;
pub const SCREEN_HEIGHT: f64 = 982.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub d_model: usize,
    pub n_enc_layers: usize,
    pub n_dec_layers: usize,
    pub n_text_layers: usize,
    pub n_heads: usize,
    /// Feed-forward width as a multiple of `d_model`.
    pub ff_mult: usize,
    pub max_gaze_len: usize,
    pub max_tokens: usize,
    /// Rate of the gaze grid fed to the encoder.
    pub gaze_hz: f64,
    pub vocab_size: usize,
    /// Width of each knowledge embedding (tf bin, POS, NER).
    pub knowledge_dim: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub use_gaze: bool,
    pub use_text: bool,
    pub use_knowledge: bool,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_model: 64,
            n_enc_layers: 2,
            n_dec_layers: 2,
            n_text_layers: 2,
            n_heads: 4,
            ff_mult: 4,
            max_gaze_len: 180,
            max_tokens: 64,
            gaze_hz: 60.0,
            vocab_size: 8000,
            knowledge_dim: 8,
            alpha: 0.9,
            gamma: 2.0,
            use_gaze: true,
            use_text: true,
            use_knowledge: true,
            seed: 0,
        }
    }
}

impl ModelConfig {
    /// Single-layer, 16-wide detector on a 15 Hz gaze grid: trains in a
    /// couple of minutes on one CPU core over the default synthetic set.
    pub fn desk(vocab_size: usize) -> Self {
        Self {
            d_model: 16,
            n_enc_layers: 1,
            n_dec_layers: 1,
            n_text_layers: 1,
            n_heads: 2,
            gaze_hz: 15.0,
            max_gaze_len: 45,
            max_tokens: 32,
            vocab_size,
            seed: 1,
            ..Self::default()
        }
    }

    /// Text hidden width.
    pub fn n_r(&self) -> usize {
        self.d_model
    }

    /// Knowledge width: three embeddings plus the log-frequency scalar.
    pub fn n_k(&self) -> usize {
        3 * self.knowledge_dim + 1
    }

    pub fn head_width(&self) -> usize {
        let mut w = 0;
        if self.use_gaze {
            w += self.d_model;
        }
        if self.use_text {
            w += self.n_r();
        }
        if self.use_knowledge {
            w += self.n_k();
        }
        w
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_heads == 0 || self.d_model % self.n_heads != 0 {
            return invalid(format!("d_model {} not divisible by {} heads", self.d_model, self.n_heads));
        }
        if self.max_gaze_len == 0 || self.max_gaze_len > 180 {
            return invalid("max_gaze_len must be in 1..=180");
        }
        if self.max_tokens == 0 || self.max_tokens > 64 {
            return invalid("max_tokens must be in 1..=64");
        }
        if self.max_gaze_len as f64 + 1e-9 < 3.0 * self.gaze_hz {
            return invalid(format!("max_gaze_len {} cannot hold 3 s at {} Hz", self.max_gaze_len, self.gaze_hz));
        }
        if !(0.0 < self.alpha && self.alpha < 1.0) || !(self.gamma >= 0.0) {
            return invalid("focal α must be in (0,1) and γ ≥ 0");
        }
        if !(self.use_gaze || self.use_text || self.use_knowledge) {
            return invalid("at least one of gaze, text, knowledge must be enabled");
        }
        if self.vocab_size < 2 {
            return invalid("vocabulary too small");
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct GazeBranch {
    input: Linear,
    encoder: Vec<EncoderLayer>,
    enc_ln: LayerNorm,
    token_input: Linear,
    decoder: Vec<DecoderLayer>,
    dec_ln: LayerNorm,
}

#[derive(Clone, Debug)]
struct TextBranch {
    embedding: lexgaze_tensor::ParamId,
    positions: lexgaze_tensor::ParamId,
    layers: Vec<EncoderLayer>,
    ln: LayerNorm,
}

#[derive(Clone, Debug)]
struct KnowledgeBranch {
    tf: lexgaze_tensor::ParamId,
    pos: lexgaze_tensor::ParamId,
    ner: lexgaze_tensor::ParamId,
}

/// Parameters plus the calibrated decision threshold.
#[derive(Clone, Debug)]
pub struct DetectorModel {
    pub config: ModelConfig,
    pub params: ParamStore,
    pub threshold: f64,
    gaze: Option<GazeBranch>,
    text: Option<TextBranch>,
    knowledge: Option<KnowledgeBranch>,
    head: Linear,
}

/// Checkpoint header contents besides the parameter manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub model: ModelConfig,
    pub threshold: f64,
    pub vocab_hash: String,
}

impl DetectorModel {
    /// Fresh model; initialization is a pure function of `config.seed`.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let d = config.d_model;
        let d_ff = d * config.ff_mult;
        let h = config.n_heads;
        let mut b = Builder {
            store: &mut store,
            rng: &mut rng,
            group: LrGroup::EncoderDecoder,
        };
        let gaze = if config.use_gaze {
            Some(GazeBranch {
                input: Linear::new(&mut b, "gaze.input", 4, d)?,
                encoder: (0..config.n_enc_layers)
                    .map(|i| EncoderLayer::new(&mut b, &format!("gaze.enc{i}"), d, h, d_ff))
                    .collect::<Result<_>>()?,
                enc_ln: LayerNorm::new(&mut b, "gaze.enc_ln", d)?,
                token_input: Linear::new(&mut b, "gaze.token_input", 4, d)?,
                decoder: (0..config.n_dec_layers)
                    .map(|i| DecoderLayer::new(&mut b, &format!("gaze.dec{i}"), d, h, d_ff))
                    .collect::<Result<_>>()?,
                dec_ln: LayerNorm::new(&mut b, "gaze.dec_ln", d)?,
            })
        } else {
            None
        };
        let knowledge = if config.use_knowledge {
            let k = config.knowledge_dim;
            Some(KnowledgeBranch {
                tf: b.weight("knowledge.tf_bin", &[TF_BINS, k])?,
                pos: b.weight("knowledge.pos", &[PosTag::COUNT, k])?,
                ner: b.weight("knowledge.ner", &[NerTag::COUNT, k])?,
            })
        } else {
            None
        };
        let head = Linear::new(&mut b, "head", config.head_width(), 1)?;
        b.group = LrGroup::Backbone;
        let text = if config.use_text {
            let r = config.n_r();
            Some(TextBranch {
                embedding: b.weight("text.embedding", &[config.vocab_size, r])?,
                positions: b.weight("text.positions", &[config.max_tokens, r])?,
                layers: (0..config.n_text_layers)
                    .map(|i| EncoderLayer::new(&mut b, &format!("text.layer{i}"), r, h, r * config.ff_mult))
                    .collect::<Result<_>>()?,
                ln: LayerNorm::new(&mut b, "text.ln", r)?,
            })
        } else {
            None
        };
        Ok(Self {
            config,
            params: store,
            threshold: 0.5,
            gaze,
            text,
            knowledge,
            head,
        })
    }

    /// `H_g`: `[B, Lg, d_model]`.
    pub fn encode_gaze<'t>(&self, tape: &'t Tape, batch: &WindowBatch) -> Result<Var<'t>> {
        let g = self.gaze.as_ref().ok_or_else(|| CoreError::Invalid("model has no gaze branch".into()))?;
        if batch.gaze_valid.iter().all(|v| !v) {
            return invalid("empty gaze window");
        }
        let d = self.config.d_model;
        let (b, lg) = (batch.batch, batch.gaze_len);
        let x = tape.constant(batch.gaze.clone());
        let x = g.input.forward(tape, &self.params, x)?;
        let pe = sinusoidal(lg, d);
        let mut pe_b = Vec::with_capacity(b * lg * d);
        for _ in 0..b {
            pe_b.extend_from_slice(pe.data());
        }
        let mut h = x.add(tape.constant(Tensor::new(vec![b, lg, d], pe_b)?))?;
        for layer in &g.encoder {
            h = layer.forward(tape, &self.params, h, &batch.gaze_mask)?;
        }
        g.enc_ln.forward(tape, &self.params, h)
    }

    /// `P`: `[B, Lt, d_model]`.
    pub fn decode_tokens<'t>(&self, tape: &'t Tape, h_g: Var<'t>, batch: &WindowBatch) -> Result<Var<'t>> {
        let g = self.gaze.as_ref().ok_or_else(|| CoreError::Invalid("model has no gaze branch".into()))?;
        if batch.token_valid.iter().all(|v| !v) {
            return invalid("empty token mask");
        }
        let x = tape.constant(batch.token_feats.clone());
        let mut h = g.token_input.forward(tape, &self.params, x)?;
        for layer in &g.decoder {
            h = layer.forward(tape, &self.params, h, h_g, &batch.token_mask, &batch.gaze_mask)?;
        }
        g.dec_ln.forward(tape, &self.params, h)
    }

    /// `Z`: `[B, Lt, n_r]`.
    pub fn encode_text<'t>(&self, tape: &'t Tape, batch: &WindowBatch) -> Result<Var<'t>> {
        let t = self.text.as_ref().ok_or_else(|| CoreError::Invalid("model has no text branch".into()))?;
        let (b, lt) = (batch.batch, batch.n_tokens);
        let emb = tape.embedding(tape.param(&self.params, t.embedding), &batch.token_ids, &[b, lt])?;
        let positions: Vec<usize> = (0..b).flat_map(|_| 0..lt).collect();
        let pos = tape.embedding(tape.param(&self.params, t.positions), &positions, &[b, lt])?;
        let mut h = emb.add(pos)?;
        for layer in &t.layers {
            h = layer.forward(tape, &self.params, h, &batch.token_mask)?;
        }
        t.ln.forward(tape, &self.params, h)
    }

    /// `K`: `[B, Lt, n_k]`.
    pub fn knowledge_embed<'t>(&self, tape: &'t Tape, batch: &WindowBatch) -> Result<Var<'t>> {
        let k = self
            .knowledge
            .as_ref()
            .ok_or_else(|| CoreError::Invalid("model has no knowledge branch".into()))?;
        let shape = [batch.batch, batch.n_tokens];
        let tf = tape.embedding(tape.param(&self.params, k.tf), &batch.tf_bin, &shape)?;
        let pos = tape.embedding(tape.param(&self.params, k.pos), &batch.pos, &shape)?;
        let ner = tape.embedding(tape.param(&self.params, k.ner), &batch.ner, &shape)?;
        let raw = tape.constant(batch.log_tf.clone());
        Ok(tape.concat_last(&[tf, pos, ner, raw])?)
    }

    /// `p = σ(W_o·[P; Z; K] + b_o)`, returned as `[B, Lt]`.
    pub fn classify<'t>(&self, tape: &'t Tape, parts: &[Var<'t>]) -> Result<Var<'t>> {
        let h = if parts.len() == 1 { parts[0] } else { tape.concat_last(parts)? };
        let shape = h.shape();
        if shape.last() != Some(&self.config.head_width()) {
            return invalid(format!(
                "classifier expects width {}, got {:?}",
                self.config.head_width(),
                shape
            ));
        }
        let logit = self.head.forward(tape, &self.params, h)?;
        Ok(logit.sigmoid().reshape(&shape[..shape.len() - 1])?)
    }

    /// Token probabilities `[B, Lt]`.
    pub fn forward<'t>(&self, tape: &'t Tape, batch: &WindowBatch) -> Result<Var<'t>> {
        let mut parts = Vec::with_capacity(3);
        if self.gaze.is_some() {
            let h_g = self.encode_gaze(tape, batch)?;
            parts.push(self.decode_tokens(tape, h_g, batch)?);
        }
        if self.text.is_some() {
            parts.push(self.encode_text(tape, batch)?);
        }
        if self.knowledge.is_some() {
            parts.push(self.knowledge_embed(tape, batch)?);
        }
        self.classify(tape, &parts)
    }

    /// Inference on rows; returns per-row token probabilities.
    pub fn predict(&self, rows: &[&ModelRow]) -> Result<Vec<Vec<f64>>> {
        let batch = WindowBatch::new(rows, &self.config)?;
        let tape = Tape::no_grad();
        let p = self.forward(&tape, &batch)?.value();
        let lt = batch.n_tokens;
        Ok(rows
            .iter()
            .enumerate()
            .map(|(r, row)| p.data()[r * lt..r * lt + row.tokens.len()].to_vec())
            .collect())
    }

    pub fn meta(&self, vocab_hash: &str) -> CheckpointMeta {
        CheckpointMeta {
            model: self.config.clone(),
            threshold: self.threshold,
            vocab_hash: vocab_hash.to_string(),
        }
    }

    pub fn to_bytes(&self, vocab_hash: &str) -> Result<Vec<u8>> {
        Ok(checkpoint::to_bytes(&serde_json::to_value(self.meta(vocab_hash))?, &self.params)?)
    }

    pub fn save(&self, path: &Path, vocab_hash: &str) -> Result<()> {
        std::fs::write(path, self.to_bytes(vocab_hash)?)?;
        Ok(())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, CheckpointMeta)> {
        let ck = checkpoint::from_bytes(bytes)?;
        let meta: CheckpointMeta = serde_json::from_value(ck.meta.clone())?;
        let mut model = Self::new(meta.model.clone())?;
        ck.load_into(&mut model.params)?;
        model.threshold = meta.threshold;
        Ok((model, meta))
    }

    pub fn load(path: &Path) -> Result<(Self, CheckpointMeta)> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// Replaces the token embedding table with `rows` (one per vocabulary
    /// id, `n_r` wide); ids beyond `vocab_size` are ignored.
    pub fn set_embeddings(&mut self, rows: &[Vec<f64>]) -> Result<usize> {
        let t = self.text.as_ref().ok_or_else(|| CoreError::Invalid("model has no text branch".into()))?;
        let r = self.config.n_r();
        let table = &mut self.params.get_mut(t.embedding).value;
        let n = rows.len().min(self.config.vocab_size);
        for (id, row) in rows[..n].iter().enumerate() {
            if row.len() != r {
                return invalid(format!("embedding row {id} has width {}, expected {r}", row.len()));
            }
            table.data_mut()[id * r..(id + 1) * r].copy_from_slice(row);
        }
        Ok(n)
    }

    /// Overwrites the first rows of the token embedding table with vectors
    /// from a whitespace-separated text file (`unit v1 v2 …`).
    pub fn load_embeddings(&mut self, path: &Path, vocab: &crate::text::Vocabulary) -> Result<usize> {
        let t = self.text.as_ref().ok_or_else(|| CoreError::Invalid("model has no text branch".into()))?;
        let r = self.config.n_r();
        let text = std::fs::read_to_string(path)?;
        let table = &mut self.params.get_mut(t.embedding).value;
        let mut loaded = 0;
        for (i, line) in text.lines().enumerate() {
            let mut it = line.split_whitespace();
            let Some(unit) = it.next() else { continue };
            let vals: Vec<f64> = it.map(str::parse).collect::<std::result::Result<_, _>>().map_err(|e| {
                CoreError::Parse {
                    path: path.display().to_string(),
                    line: i + 1,
                    message: format!("{e}"),
                }
            })?;
            if vals.len() != r {
                return Err(CoreError::Parse {
                    path: path.display().to_string(),
                    line: i + 1,
                    message: format!("expected {r} values, got {}", vals.len()),
                });
            }
            if let Some(id) = vocab.id(unit) {
                let id = id as usize;
                if id < self.config.vocab_size {
                    table.data_mut()[id * r..(id + 1) * r].copy_from_slice(&vals);
                    loaded += 1;
                }
            }
        }
        Ok(loaded)
    }
}
