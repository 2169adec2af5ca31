//! Parameterized building blocks. Each layer only stores parameter ids;
//! values live in the model's `ParamStore` and are bound per tape.

use lexgaze_tensor::{init, LrGroup, ParamId, ParamStore, Tape, Tensor, Var};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

pub const INIT_STD: f64 = 0.02;
pub const LN_EPS: f64 = 1e-9;
pub const MASKED: f64 = -1e9;

pub(crate) struct Builder<'a> {
    pub store: &'a mut ParamStore,
    pub rng: &'a mut ChaCha8Rng,
    pub group: LrGroup,
}

impl Builder<'_> {
    pub fn weight(&mut self, name: &str, shape: &[usize]) -> Result<ParamId> {
        let t = init::truncated_normal(shape, INIT_STD, self.rng);
        Ok(self.store.add(name, self.group, t)?)
    }

    pub fn fill(&mut self, name: &str, shape: &[usize], v: f64) -> Result<ParamId> {
        Ok(self.store.add(name, self.group, Tensor::full(shape, v))?)
    }
}

#[derive(Clone, Debug)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    pub(crate) fn new(bld: &mut Builder, name: &str, d_in: usize, d_out: usize) -> Result<Self> {
        Ok(Self {
            w: bld.weight(&format!("{name}.w"), &[d_in, d_out])?,
            b: bld.fill(&format!("{name}.b"), &[d_out], 0.0)?,
        })
    }

    pub fn forward<'t>(&self, tape: &'t Tape, store: &ParamStore, x: Var<'t>) -> Result<Var<'t>> {
        Ok(x.matmul(tape.param(store, self.w))?.add(tape.param(store, self.b))?)
    }
}

#[derive(Clone, Debug)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub bias: ParamId,
}

impl LayerNorm {
    pub(crate) fn new(bld: &mut Builder, name: &str, d: usize) -> Result<Self> {
        Ok(Self {
            gain: bld.fill(&format!("{name}.gain"), &[d], 1.0)?,
            bias: bld.fill(&format!("{name}.bias"), &[d], 0.0)?,
        })
    }

    pub fn forward<'t>(&self, tape: &'t Tape, store: &ParamStore, x: Var<'t>) -> Result<Var<'t>> {
        Ok(x.layer_norm(tape.param(store, self.gain), tape.param(store, self.bias), LN_EPS)?)
    }
}

/// Pre-norm multi-head attention sublayer with residual connection.
#[derive(Clone, Debug)]
pub struct Attention {
    ln: LayerNorm,
    q: Linear,
    k: Linear,
    v: Linear,
    o: Linear,
    heads: usize,
}

impl Attention {
    pub(crate) fn new(bld: &mut Builder, name: &str, d: usize, heads: usize) -> Result<Self> {
        Ok(Self {
            ln: LayerNorm::new(bld, &format!("{name}.ln"), d)?,
            q: Linear::new(bld, &format!("{name}.q"), d, d)?,
            k: Linear::new(bld, &format!("{name}.k"), d, d)?,
            v: Linear::new(bld, &format!("{name}.v"), d, d)?,
            o: Linear::new(bld, &format!("{name}.o"), d, d)?,
            heads,
        })
    }

    /// `x + O(attn(Q(LN x), K(mem), V(mem)))`; `memory = None` is
    /// self-attention over the normalized input.
    pub fn forward<'t>(
        &self,
        tape: &'t Tape,
        store: &ParamStore,
        x: Var<'t>,
        memory: Option<Var<'t>>,
        key_mask: &Tensor,
    ) -> Result<Var<'t>> {
        let h = self.ln.forward(tape, store, x)?;
        let mem = memory.unwrap_or(h);
        let q = self.q.forward(tape, store, h)?;
        let k = self.k.forward(tape, store, mem)?;
        let v = self.v.forward(tape, store, mem)?;
        let a = tape.attention(q, k, v, self.heads, Some(key_mask))?;
        Ok(x.add(self.o.forward(tape, store, a)?)?)
    }
}

/// Pre-norm position-wise feed-forward sublayer with residual connection.
#[derive(Clone, Debug)]
pub struct FeedForward {
    ln: LayerNorm,
    up: Linear,
    down: Linear,
}

impl FeedForward {
    pub(crate) fn new(bld: &mut Builder, name: &str, d: usize, d_ff: usize) -> Result<Self> {
        Ok(Self {
            ln: LayerNorm::new(bld, &format!("{name}.ln"), d)?,
            up: Linear::new(bld, &format!("{name}.up"), d, d_ff)?,
            down: Linear::new(bld, &format!("{name}.down"), d_ff, d)?,
        })
    }

    pub fn forward<'t>(&self, tape: &'t Tape, store: &ParamStore, x: Var<'t>) -> Result<Var<'t>> {
        let h = self.ln.forward(tape, store, x)?;
        let h = self.up.forward(tape, store, h)?.gelu();
        Ok(x.add(self.down.forward(tape, store, h)?)?)
    }
}

/// Self-attention + feed-forward.
#[derive(Clone, Debug)]
pub struct EncoderLayer {
    attn: Attention,
    ff: FeedForward,
}

impl EncoderLayer {
    pub(crate) fn new(bld: &mut Builder, name: &str, d: usize, heads: usize, d_ff: usize) -> Result<Self> {
        Ok(Self {
            attn: Attention::new(bld, &format!("{name}.attn"), d, heads)?,
            ff: FeedForward::new(bld, &format!("{name}.ff"), d, d_ff)?,
        })
    }

    pub fn forward<'t>(&self, tape: &'t Tape, store: &ParamStore, x: Var<'t>, mask: &Tensor) -> Result<Var<'t>> {
        let x = self.attn.forward(tape, store, x, None, mask)?;
        self.ff.forward(tape, store, x)
    }
}

/// Bidirectional token self-attention, cross-attention into the gaze
/// memory, feed-forward.
#[derive(Clone, Debug)]
pub struct DecoderLayer {
    self_attn: Attention,
    cross_attn: Attention,
    ff: FeedForward,
}

impl DecoderLayer {
    pub(crate) fn new(bld: &mut Builder, name: &str, d: usize, heads: usize, d_ff: usize) -> Result<Self> {
        Ok(Self {
            self_attn: Attention::new(bld, &format!("{name}.self"), d, heads)?,
            cross_attn: Attention::new(bld, &format!("{name}.cross"), d, heads)?,
            ff: FeedForward::new(bld, &format!("{name}.ff"), d, d_ff)?,
        })
    }

    pub fn forward<'t>(
        &self,
        tape: &'t Tape,
        store: &ParamStore,
        x: Var<'t>,
        memory: Var<'t>,
        token_mask: &Tensor,
        memory_mask: &Tensor,
    ) -> Result<Var<'t>> {
        let x = self.self_attn.forward(tape, store, x, None, token_mask)?;
        let x = self.cross_attn.forward(tape, store, x, Some(memory), memory_mask)?;
        self.ff.forward(tape, store, x)
    }
}

/// Sinusoidal encoding `[len, d]`: sin on even, cos on odd channels.
pub fn sinusoidal(len: usize, d: usize) -> Tensor {
    let mut data = vec![0.0; len * d];
    for p in 0..len {
        for i in 0..d {
            let freq = 1.0 / 10000f64.powf((2 * (i / 2)) as f64 / d as f64);
            let a = p as f64 * freq;
            data[p * d + i] = if i % 2 == 0 { a.sin() } else { a.cos() };
        }
    }
    Tensor::new(vec![len, d], data).expect("shape")
}
