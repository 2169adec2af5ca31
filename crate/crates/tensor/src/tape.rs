//! Tape-based reverse-mode differentiation.
//!
//! Every op appends a node to the [`Tape`]; node ids are therefore already in
//! topological order and [`Tape::backward`] is a single reverse sweep. A tape
//! can be differentiated once. Parameter gradients are returned in a
//! [`Gradients`] value and summed into a [`ParamStore`](crate::ParamStore) by
//! the caller.

use std::cell::{Cell, RefCell};
use std::collections::BTreeMap;

use crate::error::{Result, TensorError};
use crate::kernels::{self, gemm, View};
use crate::params::{ParamId, ParamStore};
use crate::tensor::Tensor;

/// Backward rule for an op defined outside this crate.
pub trait CustomBackward {
    /// Returns one gradient buffer per input, each the length of that input.
    fn backward(&self, inputs: &[&Tensor], output: &Tensor, grad_out: &[f64]) -> Vec<Vec<f64>>;
}

enum Op {
    Leaf,
    Param(ParamId),
    Reshape(usize),
    Add { a: usize, b: usize },
    Mul { a: usize, b: usize },
    Scale { a: usize, c: f64 },
    MatMul { a: usize, b: usize, m: usize, k: usize, n: usize },
    ConcatLast { parts: Vec<(usize, usize)> },
    Embedding { table: usize, ids: Vec<usize> },
    Softmax { a: usize },
    LayerNorm { x: usize, gain: usize, bias: usize, xhat: Vec<f64>, inv_std: Vec<f64> },
    Gelu { a: usize },
    Sigmoid { a: usize },
    Attention(Box<AttentionSaved>),
    Sum { a: usize },
    Mean { a: usize },
    Custom { inputs: Vec<usize>, rule: Box<dyn CustomBackward> },
}

struct AttentionSaved {
    q: usize,
    k: usize,
    v: usize,
    batch: usize,
    heads: usize,
    lq: usize,
    lk: usize,
    dim: usize,
    probs: Vec<f64>,
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    param_nodes: RefCell<BTreeMap<ParamId, usize>>,
    consumed: Cell<bool>,
    grad_enabled: bool,
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
            param_nodes: RefCell::new(BTreeMap::new()),
            consumed: Cell::new(false),
            grad_enabled: true,
        }
    }

    /// A tape whose parameters do not require gradients (inference only).
    pub fn no_grad() -> Self {
        Self {
            grad_enabled: false,
            ..Self::new()
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Tensor, op: Op, requires_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn rg(&self, ids: &[usize]) -> bool {
        let nodes = self.nodes.borrow();
        ids.iter().any(|&i| nodes[i].requires_grad)
    }

    pub fn input(&self, value: Tensor, requires_grad: bool) -> Var<'_> {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.input(value, false)
    }

    /// Binds a parameter; repeated calls for the same id return the same node.
    pub fn param(&self, store: &ParamStore, id: ParamId) -> Var<'_> {
        if let Some(&node) = self.param_nodes.borrow().get(&id) {
            return Var { tape: self, id: node };
        }
        let v = self.push(store.get(id).value.clone(), Op::Param(id), self.grad_enabled);
        self.param_nodes.borrow_mut().insert(id, v.id);
        v
    }

    pub fn concat_last(&self, parts: &[Var<'_>]) -> Result<Var<'_>> {
        if parts.is_empty() {
            return Err(TensorError::Invalid("concat of zero tensors".into()));
        }
        let nodes = self.nodes.borrow();
        let first = nodes[parts[0].id].value.shape().to_vec();
        let lead = &first[..first.len() - 1];
        let rows: usize = lead.iter().product();
        let mut widths = Vec::with_capacity(parts.len());
        for p in parts {
            let s = nodes[p.id].value.shape();
            if &s[..s.len() - 1] != lead {
                return Err(TensorError::ShapeMismatch {
                    op: "concat_last",
                    lhs: first.clone(),
                    rhs: s.to_vec(),
                });
            }
            widths.push((p.id, s[s.len() - 1]));
        }
        let total: usize = widths.iter().map(|w| w.1).sum();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &(id, w) in &widths {
                out.extend_from_slice(&nodes[id].value.data()[r * w..(r + 1) * w]);
            }
        }
        let mut shape = lead.to_vec();
        shape.push(total);
        drop(nodes);
        let rg = self.rg(&widths.iter().map(|w| w.0).collect::<Vec<_>>());
        let value = Tensor::new(shape, out)?;
        Ok(self.push(value, Op::ConcatLast { parts: widths }, rg))
    }

    /// Row lookup: output shape is `ids_shape + [table_cols]`.
    pub fn embedding<'t>(&'t self, table: Var<'t>, ids: &[usize], ids_shape: &[usize]) -> Result<Var<'t>> {
        let n: usize = ids_shape.iter().product();
        if n != ids.len() {
            return Err(TensorError::BadLength {
                len: ids.len(),
                shape: ids_shape.to_vec(),
            });
        }
        let nodes = self.nodes.borrow();
        let t = &nodes[table.id].value;
        if t.shape().len() != 2 {
            return Err(TensorError::Invalid(format!(
                "embedding table must be 2-D, got {:?}",
                t.shape()
            )));
        }
        let (rows, cols) = (t.shape()[0], t.shape()[1]);
        let mut out = Vec::with_capacity(n * cols);
        for &i in ids {
            if i >= rows {
                return Err(TensorError::IndexOutOfRange { index: i, rows });
            }
            out.extend_from_slice(&t.data()[i * cols..(i + 1) * cols]);
        }
        let rg = nodes[table.id].requires_grad;
        drop(nodes);
        let mut shape = ids_shape.to_vec();
        shape.push(cols);
        let value = Tensor::new(shape, out)?;
        Ok(self.push(
            value,
            Op::Embedding {
                table: table.id,
                ids: ids.to_vec(),
            },
            rg,
        ))
    }

    /// Multi-head scaled dot-product attention on `[batch, len, dim]` inputs.
    ///
    /// `mask` is additive and has shape `[batch, lk]` (key padding) or
    /// `[batch, lq, lk]`. Callers must leave at least one unmasked key per row.
    pub fn attention<'t>(
        &'t self,
        q: Var<'t>,
        k: Var<'t>,
        v: Var<'t>,
        heads: usize,
        mask: Option<&Tensor>,
    ) -> Result<Var<'t>> {
        let nodes = self.nodes.borrow();
        let (qt, kt, vt) = (&nodes[q.id].value, &nodes[k.id].value, &nodes[v.id].value);
        if qt.shape().len() != 3 || kt.shape() != vt.shape() || kt.shape().len() != 3 {
            return Err(TensorError::ShapeMismatch {
                op: "attention",
                lhs: qt.shape().to_vec(),
                rhs: kt.shape().to_vec(),
            });
        }
        let (batch, lq, dim) = (qt.shape()[0], qt.shape()[1], qt.shape()[2]);
        let lk = kt.shape()[1];
        if kt.shape()[0] != batch || kt.shape()[2] != dim {
            return Err(TensorError::ShapeMismatch {
                op: "attention",
                lhs: qt.shape().to_vec(),
                rhs: kt.shape().to_vec(),
            });
        }
        if heads == 0 || dim % heads != 0 {
            return Err(TensorError::Invalid(format!(
                "width {dim} is not divisible by {heads} heads"
            )));
        }
        let full_mask = match mask {
            None => false,
            Some(m) if m.shape() == [batch, lk] => false,
            Some(m) if m.shape() == [batch, lq, lk] => true,
            Some(m) => {
                return Err(TensorError::ShapeMismatch {
                    op: "attention mask",
                    lhs: vec![batch, lq, lk],
                    rhs: m.shape().to_vec(),
                })
            }
        };
        let dh = dim / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut probs = vec![0.0; batch * heads * lq * lk];
        let mut out = vec![0.0; batch * lq * dim];
        for b in 0..batch {
            for h in 0..heads {
                let p_off = (b * heads + h) * lq * lk;
                let qo = b * lq * dim + h * dh;
                let ko = b * lk * dim + h * dh;
                gemm(
                    lq,
                    dh,
                    lk,
                    View::rows(qt.data(), qo, dim),
                    View::transposed(kt.data(), ko, dim),
                    &mut probs,
                    p_off,
                    lk,
                    0.0,
                );
                for i in 0..lq {
                    let row = &mut probs[p_off + i * lk..p_off + (i + 1) * lk];
                    for (j, s) in row.iter_mut().enumerate() {
                        *s *= scale;
                        if let Some(m) = mask {
                            *s += if full_mask {
                                m.data()[(b * lq + i) * lk + j]
                            } else {
                                m.data()[b * lk + j]
                            };
                        }
                    }
                    kernels::softmax_row(row);
                }
                gemm(
                    lq,
                    lk,
                    dh,
                    View::rows(&probs, p_off, lk),
                    View::rows(vt.data(), ko, dim),
                    &mut out,
                    qo,
                    dim,
                    0.0,
                );
            }
        }
        let rg = nodes[q.id].requires_grad || nodes[k.id].requires_grad || nodes[v.id].requires_grad;
        drop(nodes);
        let value = Tensor::new(vec![batch, lq, dim], out)?;
        Ok(self.push(
            value,
            Op::Attention(Box::new(AttentionSaved {
                q: q.id,
                k: k.id,
                v: v.id,
                batch,
                heads,
                lq,
                lk,
                dim,
                probs,
            })),
            rg,
        ))
    }

    /// Appends an op whose forward value was computed by the caller.
    pub fn custom<'t>(&'t self, inputs: &[Var<'t>], value: Tensor, rule: Box<dyn CustomBackward>) -> Var<'t> {
        let ids: Vec<usize> = inputs.iter().map(|v| v.id).collect();
        let rg = self.rg(&ids);
        self.push(value, Op::Custom { inputs: ids, rule }, rg)
    }

    /// Reverse sweep from a scalar `loss`. The tape can be differentiated
    /// only once; a second call returns [`TensorError::GraphConsumed`].
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients> {
        if self.consumed.get() {
            return Err(TensorError::GraphConsumed);
        }
        let nodes = self.nodes.borrow();
        let root = &nodes[loss.id].value;
        if root.numel() != 1 {
            return Err(TensorError::NonScalarLoss(root.shape().to_vec()));
        }
        self.consumed.set(true);
        let mut grads: Vec<Option<Vec<f64>>> = (0..nodes.len()).map(|_| None).collect();
        grads[loss.id] = Some(vec![1.0]);

        for id in (0..=loss.id).rev() {
            let node = &nodes[id];
            if !node.requires_grad {
                grads[id] = None;
                continue;
            }
            let g = match &node.op {
                Op::Leaf | Op::Param(_) => continue,
                _ => match grads[id].take() {
                    Some(g) => g,
                    None => continue,
                },
            };
            backprop_node(&nodes, node, &g, &mut grads);
        }

        let mut params = Vec::new();
        let mut kept = Vec::with_capacity(nodes.len());
        for (id, node) in nodes.iter().enumerate() {
            let g = match node.op {
                Op::Leaf | Op::Param(_) if node.requires_grad => Some(
                    grads[id]
                        .take()
                        .unwrap_or_else(|| vec![0.0; node.value.numel()]),
                ),
                _ => None,
            };
            if let Op::Param(p) = node.op {
                if g.is_some() {
                    params.push((p, id));
                }
            }
            kept.push(g.map(|g| (node.value.shape().to_vec(), g)));
        }
        Ok(Gradients { grads: kept, params })
    }
}

/// Gradients of leaf inputs and parameters from one backward sweep.
pub struct Gradients {
    grads: Vec<Option<(Vec<usize>, Vec<f64>)>>,
    params: Vec<(ParamId, usize)>,
}

impl Gradients {
    pub fn wrt(&self, v: Var<'_>) -> Option<Tensor> {
        self.grads
            .get(v.id)
            .and_then(|g| g.as_ref())
            .map(|(s, g)| Tensor::new(s.clone(), g.clone()).expect("shape recorded with grad"))
    }

    pub fn param(&self, id: ParamId) -> Option<&[f64]> {
        self.params
            .iter()
            .find(|(p, _)| *p == id)
            .and_then(|&(_, node)| self.grads[node].as_ref())
            .map(|(_, g)| g.as_slice())
    }

    pub fn param_grads(&self) -> impl Iterator<Item = (ParamId, &[f64])> + '_ {
        self.params.iter().filter_map(move |&(p, node)| {
            self.grads[node].as_ref().map(|(_, g)| (p, g.as_slice()))
        })
    }
}

fn slot<'g>(grads: &'g mut [Option<Vec<f64>>], nodes: &[Node], id: usize) -> Option<&'g mut Vec<f64>> {
    if !nodes[id].requires_grad {
        return None;
    }
    let n = nodes[id].value.numel();
    Some(grads[id].get_or_insert_with(|| vec![0.0; n]))
}

fn add_into(grads: &mut [Option<Vec<f64>>], nodes: &[Node], id: usize, g: &[f64]) {
    if let Some(buf) = slot(grads, nodes, id) {
        for (a, b) in buf.iter_mut().zip(g) {
            *a += b;
        }
    }
}

fn backprop_node(nodes: &[Node], node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
    match &node.op {
        Op::Leaf | Op::Param(_) => {}
        Op::Reshape(a) => add_into(grads, nodes, *a, g),
        Op::Add { a, b } => {
            add_into(grads, nodes, *a, g);
            let bn = nodes[*b].value.numel();
            if let Some(buf) = slot(grads, nodes, *b) {
                for chunk in g.chunks(bn) {
                    for (x, y) in buf.iter_mut().zip(chunk) {
                        *x += y;
                    }
                }
            }
        }
        Op::Mul { a, b } => {
            let (av, bv) = (nodes[*a].value.data(), nodes[*b].value.data());
            let ga: Vec<f64> = g.iter().zip(bv).map(|(g, b)| g * b).collect();
            let gb: Vec<f64> = g.iter().zip(av).map(|(g, a)| g * a).collect();
            add_into(grads, nodes, *a, &ga);
            add_into(grads, nodes, *b, &gb);
        }
        Op::Scale { a, c } => {
            let ga: Vec<f64> = g.iter().map(|g| g * c).collect();
            add_into(grads, nodes, *a, &ga);
        }
        Op::MatMul { a, b, m, k, n } => {
            let (m, k, n) = (*m, *k, *n);
            let av = nodes[*a].value.data();
            let bv = nodes[*b].value.data();
            if let Some(buf) = slot(grads, nodes, *a) {
                // dA = dC · Bᵀ
                gemm(m, n, k, View::rows(g, 0, n), View::transposed(bv, 0, n), buf, 0, k, 1.0);
            }
            if let Some(buf) = slot(grads, nodes, *b) {
                // dB = Aᵀ · dC
                gemm(k, m, n, View::transposed(av, 0, k), View::rows(g, 0, n), buf, 0, n, 1.0);
            }
        }
        Op::ConcatLast { parts } => {
            let total: usize = parts.iter().map(|p| p.1).sum();
            let rows = g.len() / total.max(1);
            let mut off = 0;
            for &(id, w) in parts {
                if let Some(buf) = slot(grads, nodes, id) {
                    for r in 0..rows {
                        for j in 0..w {
                            buf[r * w + j] += g[r * total + off + j];
                        }
                    }
                }
                off += w;
            }
        }
        Op::Embedding { table, ids } => {
            let cols = nodes[*table].value.shape()[1];
            if let Some(buf) = slot(grads, nodes, *table) {
                for (r, &i) in ids.iter().enumerate() {
                    for j in 0..cols {
                        buf[i * cols + j] += g[r * cols + j];
                    }
                }
            }
        }
        Op::Softmax { a } => {
            let y = node.value.data();
            let d = node.value.last_dim();
            let mut ga = vec![0.0; y.len()];
            for ((yr, gr), out) in y.chunks(d).zip(g.chunks(d)).zip(ga.chunks_mut(d)) {
                let dot: f64 = yr.iter().zip(gr).map(|(y, g)| y * g).sum();
                for j in 0..d {
                    out[j] = yr[j] * (gr[j] - dot);
                }
            }
            add_into(grads, nodes, *a, &ga);
        }
        Op::LayerNorm {
            x,
            gain,
            bias,
            xhat,
            inv_std,
        } => {
            let d = node.value.last_dim();
            let gv = nodes[*gain].value.data();
            let mut gx = vec![0.0; g.len()];
            let mut gg = vec![0.0; d];
            let mut gb = vec![0.0; d];
            for (r, ((gr, xr), out)) in g.chunks(d).zip(xhat.chunks(d)).zip(gx.chunks_mut(d)).enumerate() {
                let mut sum_dxhat = 0.0;
                let mut sum_dxhat_xhat = 0.0;
                for j in 0..d {
                    let dxh = gr[j] * gv[j];
                    sum_dxhat += dxh;
                    sum_dxhat_xhat += dxh * xr[j];
                    gg[j] += gr[j] * xr[j];
                    gb[j] += gr[j];
                }
                let s = inv_std[r] / d as f64;
                for j in 0..d {
                    let dxh = gr[j] * gv[j];
                    out[j] = s * (d as f64 * dxh - sum_dxhat - xr[j] * sum_dxhat_xhat);
                }
            }
            add_into(grads, nodes, *x, &gx);
            add_into(grads, nodes, *gain, &gg);
            add_into(grads, nodes, *bias, &gb);
        }
        Op::Gelu { a } => {
            let av = nodes[*a].value.data();
            let ga: Vec<f64> = g.iter().zip(av).map(|(g, &x)| g * kernels::gelu_grad(x)).collect();
            add_into(grads, nodes, *a, &ga);
        }
        Op::Sigmoid { a } => {
            let y = node.value.data();
            let ga: Vec<f64> = g.iter().zip(y).map(|(g, &y)| g * y * (1.0 - y)).collect();
            add_into(grads, nodes, *a, &ga);
        }
        Op::Attention(s) => backprop_attention(nodes, s, g, grads),
        Op::Sum { a } => {
            let n = nodes[*a].value.numel();
            add_into(grads, nodes, *a, &vec![g[0]; n]);
        }
        Op::Mean { a } => {
            let n = nodes[*a].value.numel();
            add_into(grads, nodes, *a, &vec![g[0] / n as f64; n]);
        }
        Op::Custom { inputs, rule } => {
            let vals: Vec<&Tensor> = inputs.iter().map(|&i| &nodes[i].value).collect();
            let gs = rule.backward(&vals, &node.value, g);
            for (&i, gi) in inputs.iter().zip(gs) {
                add_into(grads, nodes, i, &gi);
            }
        }
    }
}

fn backprop_attention(nodes: &[Node], s: &AttentionSaved, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
    let AttentionSaved {
        q,
        k,
        v,
        batch,
        heads,
        lq,
        lk,
        dim,
        ref probs,
    } = *s;
    let dh = dim / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let (qv, kv, vv) = (nodes[q].value.data(), nodes[k].value.data(), nodes[v].value.data());
    let mut gq = vec![0.0; qv.len()];
    let mut gk = vec![0.0; kv.len()];
    let mut gv = vec![0.0; vv.len()];
    let mut dp = vec![0.0; lq * lk];
    for b in 0..batch {
        for h in 0..heads {
            let p_off = (b * heads + h) * lq * lk;
            let qo = b * lq * dim + h * dh;
            let ko = b * lk * dim + h * dh;
            // dV += Pᵀ · dO
            gemm(lk, lq, dh, View::transposed(probs, p_off, lk), View::rows(g, qo, dim), &mut gv, ko, dim, 1.0);
            // dP = dO · Vᵀ
            gemm(lq, dh, lk, View::rows(g, qo, dim), View::transposed(vv, ko, dim), &mut dp, 0, lk, 0.0);
            for i in 0..lq {
                let pr = &probs[p_off + i * lk..p_off + (i + 1) * lk];
                let dr = &mut dp[i * lk..(i + 1) * lk];
                let dot: f64 = pr.iter().zip(dr.iter()).map(|(p, d)| p * d).sum();
                for j in 0..lk {
                    dr[j] = pr[j] * (dr[j] - dot) * scale;
                }
            }
            // dQ += dS · K ; dK += dSᵀ · Q
            gemm(lq, lk, dh, View::rows(&dp, 0, lk), View::rows(kv, ko, dim), &mut gq, qo, dim, 1.0);
            gemm(lk, lq, dh, View::transposed(&dp, 0, lk), View::rows(qv, qo, dim), &mut gk, ko, dim, 1.0);
        }
    }
    add_into(grads, nodes, q, &gq);
    add_into(grads, nodes, k, &gk);
    add_into(grads, nodes, v, &gv);
}

impl<'t> Var<'t> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.nodes.borrow()[self.id].value.shape().to_vec()
    }

    pub fn value(&self) -> Tensor {
        self.tape.nodes.borrow()[self.id].value.clone()
    }

    pub fn with_value<R>(&self, f: impl FnOnce(&Tensor) -> R) -> R {
        f(&self.tape.nodes.borrow()[self.id].value)
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.nodes.borrow()[self.id].requires_grad
    }

    fn unary(self, f: impl Fn(f64) -> f64, op: Op) -> Var<'t> {
        let value = {
            let nodes = self.tape.nodes.borrow();
            let src = &nodes[self.id].value;
            Tensor::new(src.shape().to_vec(), src.data().iter().map(|&x| f(x)).collect())
                .expect("same shape")
        };
        let rg = self.requires_grad();
        self.tape.push(value, op, rg)
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Var<'t>> {
        let value = self.value().reshape(shape.to_vec())?;
        let rg = self.requires_grad();
        Ok(self.tape.push(value, Op::Reshape(self.id), rg))
    }

    /// Elementwise sum; `other`'s shape may be a suffix of `self`'s, in which
    /// case it is broadcast over the leading dimensions.
    pub fn add(self, other: Var<'t>) -> Result<Var<'t>> {
        let value = {
            let nodes = self.tape.nodes.borrow();
            let (a, b) = (&nodes[self.id].value, &nodes[other.id].value);
            let (sa, sb) = (a.shape(), b.shape());
            if sb.len() > sa.len() || sa[sa.len() - sb.len()..] != *sb {
                return Err(TensorError::ShapeMismatch {
                    op: "add",
                    lhs: sa.to_vec(),
                    rhs: sb.to_vec(),
                });
            }
            let bn = b.numel();
            let mut out = a.data().to_vec();
            for chunk in out.chunks_mut(bn) {
                for (x, y) in chunk.iter_mut().zip(b.data()) {
                    *x += y;
                }
            }
            Tensor::new(sa.to_vec(), out)?
        };
        let rg = self.tape.rg(&[self.id, other.id]);
        Ok(self.tape.push(
            value,
            Op::Add {
                a: self.id,
                b: other.id,
            },
            rg,
        ))
    }

    pub fn mul(self, other: Var<'t>) -> Result<Var<'t>> {
        let value = {
            let nodes = self.tape.nodes.borrow();
            let (a, b) = (&nodes[self.id].value, &nodes[other.id].value);
            if a.shape() != b.shape() {
                return Err(TensorError::ShapeMismatch {
                    op: "mul",
                    lhs: a.shape().to_vec(),
                    rhs: b.shape().to_vec(),
                });
            }
            let out = a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect();
            Tensor::new(a.shape().to_vec(), out)?
        };
        let rg = self.tape.rg(&[self.id, other.id]);
        Ok(self.tape.push(
            value,
            Op::Mul {
                a: self.id,
                b: other.id,
            },
            rg,
        ))
    }

    pub fn scale(self, c: f64) -> Var<'t> {
        self.unary(|x| x * c, Op::Scale { a: self.id, c })
    }

    /// `[.., m, k] · [k, n] -> [.., m, n]`.
    pub fn matmul(self, w: Var<'t>) -> Result<Var<'t>> {
        let (value, m, k, n) = {
            let nodes = self.tape.nodes.borrow();
            let (a, b) = (&nodes[self.id].value, &nodes[w.id].value);
            let (sa, sb) = (a.shape(), b.shape());
            if sa.is_empty() || sb.len() != 2 || sa[sa.len() - 1] != sb[0] {
                return Err(TensorError::ShapeMismatch {
                    op: "matmul",
                    lhs: sa.to_vec(),
                    rhs: sb.to_vec(),
                });
            }
            let k = sb[0];
            let n = sb[1];
            let m = a.numel() / k.max(1);
            let mut out = vec![0.0; m * n];
            gemm(m, k, n, View::rows(a.data(), 0, k), View::rows(b.data(), 0, n), &mut out, 0, n, 0.0);
            let mut shape = sa.to_vec();
            *shape.last_mut().expect("nonempty") = n;
            (Tensor::new(shape, out)?, m, k, n)
        };
        let rg = self.tape.rg(&[self.id, w.id]);
        Ok(self.tape.push(
            value,
            Op::MatMul {
                a: self.id,
                b: w.id,
                m,
                k,
                n,
            },
            rg,
        ))
    }

    /// Softmax over the last dimension after adding an optional constant
    /// mask of the same shape.
    pub fn softmax_last(self, mask: Option<&Tensor>) -> Result<Var<'t>> {
        let value = {
            let nodes = self.tape.nodes.borrow();
            let a = &nodes[self.id].value;
            let mut out = a.data().to_vec();
            if let Some(m) = mask {
                if m.shape() != a.shape() {
                    return Err(TensorError::ShapeMismatch {
                        op: "softmax mask",
                        lhs: a.shape().to_vec(),
                        rhs: m.shape().to_vec(),
                    });
                }
                out.iter_mut().zip(m.data()).for_each(|(x, m)| *x += m);
            }
            let d = a.last_dim();
            out.chunks_mut(d).for_each(kernels::softmax_row);
            Tensor::new(a.shape().to_vec(), out)?
        };
        let rg = self.requires_grad();
        Ok(self.tape.push(value, Op::Softmax { a: self.id }, rg))
    }

    pub fn layer_norm(self, gain: Var<'t>, bias: Var<'t>, eps: f64) -> Result<Var<'t>> {
        let (value, xhat, inv_std) = {
            let nodes = self.tape.nodes.borrow();
            let x = &nodes[self.id].value;
            let d = x.last_dim();
            let (g, b) = (&nodes[gain.id].value, &nodes[bias.id].value);
            if g.shape() != [d] || b.shape() != [d] {
                return Err(TensorError::ShapeMismatch {
                    op: "layer_norm",
                    lhs: x.shape().to_vec(),
                    rhs: g.shape().to_vec(),
                });
            }
            let rows = x.numel() / d.max(1);
            let mut xhat = vec![0.0; x.numel()];
            let mut inv_std = vec![0.0; rows];
            let mut out = vec![0.0; x.numel()];
            for r in 0..rows {
                let row = &x.data()[r * d..(r + 1) * d];
                let mean = row.iter().sum::<f64>() / d as f64;
                let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
                let is = 1.0 / (var + eps).sqrt();
                inv_std[r] = is;
                for j in 0..d {
                    let h = (row[j] - mean) * is;
                    xhat[r * d + j] = h;
                    out[r * d + j] = h * g.data()[j] + b.data()[j];
                }
            }
            (Tensor::new(x.shape().to_vec(), out)?, xhat, inv_std)
        };
        let rg = self.tape.rg(&[self.id, gain.id, bias.id]);
        Ok(self.tape.push(
            value,
            Op::LayerNorm {
                x: self.id,
                gain: gain.id,
                bias: bias.id,
                xhat,
                inv_std,
            },
            rg,
        ))
    }

    pub fn gelu(self) -> Var<'t> {
        self.unary(kernels::gelu, Op::Gelu { a: self.id })
    }

    pub fn sigmoid(self) -> Var<'t> {
        self.unary(kernels::sigmoid, Op::Sigmoid { a: self.id })
    }

    pub fn sum(self) -> Var<'t> {
        let s: f64 = self.with_value(|t| t.data().iter().sum());
        let rg = self.requires_grad();
        self.tape.push(Tensor::scalar(s), Op::Sum { a: self.id }, rg)
    }

    pub fn mean(self) -> Var<'t> {
        let s: f64 = self.with_value(|t| t.data().iter().sum::<f64>() / t.numel().max(1) as f64);
        let rg = self.requires_grad();
        self.tape.push(Tensor::scalar(s), Op::Mean { a: self.id }, rg)
    }
}
