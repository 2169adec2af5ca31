use lexgaze_tensor::Tensor;
use serde::{Deserialize, Serialize};

use super::layers::MASKED;
use super::ModelConfig;
use crate::error::{invalid, CoreError, Result};

/// One decoder/text-encoder position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TokenInput {
    pub token_id: u32,
    /// Box center over the screen extent.
    pub wx: f64,
    pub wy: f64,
    /// Gaze-token distance over the screen diagonal.
    pub d: f64,
    /// In-box sample count over the number of gaze samples.
    pub t: f64,
    pub tf_bin: usize,
    pub pos: usize,
    pub ner: usize,
    pub log_tf: f64,
}

/// Model input for one window: gaze steps `[sx, sy, rx, ry]` (smoothed and
/// raw, screen-normalized) and the tokens of the words around the gaze.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelRow {
    pub gaze: Vec<[f64; 4]>,
    pub tokens: Vec<TokenInput>,
}

/// Padded tensors for a batch of rows. Padding is zero-valued and masked.
#[derive(Clone, Debug)]
pub struct WindowBatch {
    pub batch: usize,
    pub gaze_len: usize,
    pub n_tokens: usize,
    /// `[B, Lg, 4]`
    pub gaze: Tensor,
    /// Additive key mask `[B, Lg]`.
    pub gaze_mask: Tensor,
    pub gaze_valid: Vec<bool>,
    /// `[B, Lt, 4]`: w_x, w_y, d, t.
    pub token_feats: Tensor,
    /// Additive key mask `[B, Lt]`.
    pub token_mask: Tensor,
    pub token_valid: Vec<bool>,
    pub token_ids: Vec<usize>,
    pub tf_bin: Vec<usize>,
    pub pos: Vec<usize>,
    pub ner: Vec<usize>,
    /// `[B, Lt, 1]`
    pub log_tf: Tensor,
}

impl WindowBatch {
    pub fn new(rows: &[&ModelRow], cfg: &ModelConfig) -> Result<Self> {
        if rows.is_empty() {
            return Err(CoreError::Empty("batch"));
        }
        let b = rows.len();
        let lg = rows.iter().map(|r| r.gaze.len()).max().unwrap_or(0);
        let lt = rows.iter().map(|r| r.tokens.len()).max().unwrap_or(0);
        if lg > cfg.max_gaze_len || lt > cfg.max_tokens {
            return invalid(format!(
                "row exceeds model limits: {lg} gaze steps (max {}), {lt} tokens (max {})",
                cfg.max_gaze_len, cfg.max_tokens
            ));
        }
        if rows.iter().any(|r| r.gaze.is_empty()) {
            return invalid("empty gaze window");
        }
        if rows.iter().any(|r| r.tokens.is_empty()) {
            return invalid("empty token mask");
        }
        let mut gaze = vec![0.0; b * lg * 4];
        let mut gaze_mask = vec![MASKED; b * lg];
        let mut gaze_valid = vec![false; b * lg];
        let mut feats = vec![0.0; b * lt * 4];
        let mut token_mask = vec![MASKED; b * lt];
        let mut token_valid = vec![false; b * lt];
        let mut token_ids = vec![0; b * lt];
        let mut tf_bin = vec![0; b * lt];
        let mut pos = vec![0; b * lt];
        let mut ner = vec![0; b * lt];
        let mut log_tf = vec![0.0; b * lt];
        for (r, row) in rows.iter().enumerate() {
            for (j, g) in row.gaze.iter().enumerate() {
                let at = r * lg + j;
                gaze[at * 4..at * 4 + 4].copy_from_slice(g);
                gaze_mask[at] = 0.0;
                gaze_valid[at] = true;
            }
            for (j, t) in row.tokens.iter().enumerate() {
                let at = r * lt + j;
                feats[at * 4..at * 4 + 4].copy_from_slice(&[t.wx, t.wy, t.d, t.t]);
                token_mask[at] = 0.0;
                token_valid[at] = true;
                token_ids[at] = t.token_id as usize;
                tf_bin[at] = t.tf_bin;
                pos[at] = t.pos;
                ner[at] = t.ner;
                log_tf[at] = t.log_tf;
            }
        }
        if gaze.iter().chain(&feats).chain(&log_tf).any(|v| !v.is_finite()) {
            return invalid("non-finite model input");
        }
        let t = |shape: Vec<usize>, data| Tensor::new(shape, data).expect("shape");
        Ok(Self {
            batch: b,
            gaze_len: lg,
            n_tokens: lt,
            gaze: t(vec![b, lg, 4], gaze),
            gaze_mask: t(vec![b, lg], gaze_mask),
            gaze_valid,
            token_feats: t(vec![b, lt, 4], feats),
            token_mask: t(vec![b, lt], token_mask),
            token_valid,
            token_ids,
            tf_bin,
            pos,
            ner,
            log_tf: t(vec![b, lt, 1], log_tf),
        })
    }
}
