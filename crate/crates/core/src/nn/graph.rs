//! Tape-based reverse-mode differentiation over [`Mat`] values.
//!
//! A [`Graph`] is built fresh for every forward pass. Each operation
//! appends a node holding its value and whatever it needs for the backward
//! pass; [`Graph::backward`] then walks the tape in reverse.

use std::collections::HashMap;
use std::rc::Rc;

use super::mat::{gemm, Mat};
use super::params::{ParamId, Params};
use super::NnError;

const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_A: f64 = 0.044_715;

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Geometry of a batched multi-head attention call. Rows of the inputs are
/// `batch * seq` tokens, sample-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttnShape {
    pub batch: usize,
    pub seq: usize,
    pub heads: usize,
}

enum Op {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    AddTiled(Var, Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Gelu {
        x: Var,
        tanh: Vec<f64>,
    },
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<f64>,
        rstd: Vec<f64>,
    },
    MaskedSoftmax(Var),
    Attention {
        q: Var,
        k: Var,
        v: Var,
        shape: AttnShape,
        pattern: Rc<Pattern>,
        /// Attention weights for the allowed pairs only, laid out per
        /// `(sample, head)` in `pattern` order.
        probs: Vec<f64>,
    },
    RowScale {
        w: Var,
        scales: Rc<Vec<f64>>,
    },
    Embedding {
        table: Var,
        ids: Rc<Vec<usize>>,
    },
    ConcatCols(Vec<Var>),
    Reshape(Var),
    Sum(Var),
    BceWithLogits {
        logits: Var,
        targets: Rc<Mat>,
    },
    SoftmaxCrossEntropy {
        logits: Var,
        targets: Rc<Vec<usize>>,
        probs: Mat,
    },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::Transpose(_) => "transpose",
            Op::Add(..) => "add",
            Op::Mul(..) => "mul",
            Op::AddRow(..) => "add_row",
            Op::AddTiled(..) => "add_tiled",
            Op::Scale(..) => "scale",
            Op::Sigmoid(_) => "sigmoid",
            Op::Gelu { .. } => "gelu",
            Op::LayerNorm { .. } => "layer_norm",
            Op::MaskedSoftmax(_) => "masked_softmax",
            Op::Attention { .. } => "attention",
            Op::RowScale { .. } => "row_scale",
            Op::Embedding { .. } => "embedding",
            Op::ConcatCols(_) => "concat",
            Op::Reshape(_) => "reshape",
            Op::Sum(_) => "sum",
            Op::BceWithLogits { .. } => "bce_with_logits",
            Op::SoftmaxCrossEntropy { .. } => "softmax_cross_entropy",
        }
    }
}

struct Node {
    value: Mat,
    op: Op,
}

/// Additive attention mask of `seq x seq` entries in `{0, -inf}`.
pub type AttnMask = Rc<Vec<f64>>;

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    params: HashMap<usize, Var>,
    masks: HashMap<usize, AttnMask>,
    grads: Vec<Option<Mat>>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `tanh` through one `exp`; saturates beyond `|x| > 20`.
#[inline]
fn fast_tanh(x: f64) -> f64 {
    if x.abs() > 20.0 {
        return x.signum();
    }
    if x.abs() < 1e-4 {
        // Series keeps relative accuracy where `1 - 2/(e^2x + 1)` cancels.
        return x - x * x * x / 3.0;
    }
    let e = (2.0 * x).exp();
    1.0 - 2.0 / (e + 1.0)
}

/// Allowed key positions for every query row of an attention mask (CSR).
pub(crate) struct Pattern {
    starts: Vec<usize>,
    cols: Vec<usize>,
}

impl Pattern {
    fn new(seq: usize, mask: Option<&[f64]>) -> Self {
        let mut starts = Vec::with_capacity(seq + 1);
        let mut cols = Vec::new();
        starts.push(0);
        for i in 0..seq {
            for j in 0..seq {
                if mask.is_none_or(|m| m[i * seq + j] != f64::NEG_INFINITY) {
                    cols.push(j);
                }
            }
            starts.push(cols.len());
        }
        Self { starts, cols }
    }

    fn nnz(&self) -> usize {
        self.cols.len()
    }

    fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        self.starts[i]..self.starts[i + 1]
    }
}

/// Numerically stable softmax of `row + mask` in place; a fully masked row
/// becomes all zeros.
fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        row.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    let mut sum = 0.0;
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in row.iter_mut() {
        *x /= sum;
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Mat, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Mat {
        &self.nodes[v.0].value
    }

    /// Gradient of the last [`backward`](Self::backward) target with
    /// respect to `v`, if `v` influenced it.
    pub fn grad(&self, v: Var) -> Option<&Mat> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn input(&mut self, value: Mat) -> Var {
        self.push(value, Op::Leaf)
    }

    /// The node for parameter `id`, created on first use.
    pub fn param(&mut self, params: &Params, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id.0) {
            return v;
        }
        let v = self.push(params.get(id).clone(), Op::Leaf);
        self.params.insert(id.0, v);
        v
    }

    /// Gradients for every parameter in `params`; unused ones are zero.
    pub fn param_grads(&self, params: &Params) -> Vec<Mat> {
        params
            .iter()
            .map(|(id, _, value)| {
                self.params
                    .get(&id.0)
                    .and_then(|&v| self.grad(v).cloned())
                    .unwrap_or_else(|| Mat::zeros(value.rows, value.cols))
            })
            .collect()
    }

    /// The first node holding a non-finite value, as `(index, op name)`.
    pub fn first_non_finite(&self) -> Option<(usize, &'static str)> {
        self.nodes
            .iter()
            .enumerate()
            .find(|(_, n)| !n.value.all_finite() && !matches!(n.op, Op::Leaf))
            .map(|(i, n)| (i, n.op.name()))
    }

    pub fn check_finite(&self) -> Result<(), NnError> {
        match self.first_non_finite() {
            Some((node, op)) => Err(NnError::NonFinite { node, op }),
            None => Ok(()),
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        let mut out = Mat::zeros(av.rows, bv.cols);
        gemm(1.0, av, false, bv, false, 0.0, &mut out);
        self.push(out, Op::MatMul(a, b))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let out = self.value(a).transpose();
        self.push(out, Op::Transpose(a))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b));
        self.push(out, Op::Add(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.shape(), bv.shape());
        let data = av.data.iter().zip(&bv.data).map(|(x, y)| x * y).collect();
        let out = Mat::from_vec(av.rows, av.cols, data);
        self.push(out, Op::Mul(a, b))
    }

    /// `x + bias` with the `1 x cols` bias broadcast over rows.
    pub fn add_row(&mut self, x: Var, bias: Var) -> Var {
        let bv = self.value(bias).clone();
        let mut out = self.value(x).clone();
        assert_eq!((bv.rows, bv.cols), (1, out.cols));
        for r in 0..out.rows {
            for (o, b) in out.row_mut(r).iter_mut().zip(&bv.data) {
                *o += b;
            }
        }
        self.push(out, Op::AddRow(x, bias))
    }

    /// `x + tile(p)` where `p` has `seq` rows repeated over the batch.
    pub fn add_tiled(&mut self, x: Var, p: Var) -> Var {
        let pv = self.value(p).clone();
        let mut out = self.value(x).clone();
        assert_eq!(out.cols, pv.cols);
        assert_eq!(out.rows % pv.rows, 0);
        for r in 0..out.rows {
            for (o, b) in out.row_mut(r).iter_mut().zip(pv.row(r % pv.rows)) {
                *o += b;
            }
        }
        self.push(out, Op::AddTiled(x, p))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let out = self.value(x).map(|v| v * s);
        self.push(out, Op::Scale(x, s))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let out = self.value(x).map(sigmoid);
        self.push(out, Op::Sigmoid(x))
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let tanh: Vec<f64> = xv.data.iter().map(|&v| fast_tanh(GELU_C * (v + GELU_A * v * v * v))).collect();
        let data = xv.data.iter().zip(&tanh).map(|(&v, &t)| 0.5 * v * (1.0 + t)).collect();
        let out = Mat::from_vec(xv.rows, xv.cols, data);
        self.push(out, Op::Gelu { x, tanh })
    }

    /// Row-wise layer normalization with learned `1 x cols` gain and bias.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Var {
        let xv = self.value(x);
        let (rows, cols) = xv.shape();
        let (g, b) = (&self.value(gamma).data, &self.value(beta).data);
        let mut out = Mat::zeros(rows, cols);
        let mut xhat = vec![0.0; rows * cols];
        let mut rstd = vec![0.0; rows];
        for r in 0..rows {
            let row = xv.row(r);
            let mean = row.iter().sum::<f64>() / cols as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
            let rs = 1.0 / (var + LN_EPS).sqrt();
            rstd[r] = rs;
            for c in 0..cols {
                let h = (row[c] - mean) * rs;
                xhat[r * cols + c] = h;
                out.data[r * cols + c] = g[c] * h + b[c];
            }
        }
        self.push(
            out,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                rstd,
            },
        )
    }

    /// Row-wise `softmax(x + mask)` for an additive mask of `x`'s shape.
    pub fn masked_softmax(&mut self, x: Var, mask: &Mat) -> Var {
        let mut out = self.value(x).clone();
        assert_eq!(out.shape(), mask.shape());
        out.add_assign(mask);
        for r in 0..out.rows {
            softmax_in_place(out.row_mut(r));
        }
        self.push(out, Op::MaskedSoftmax(x))
    }

    /// Multi-head attention `softmax(Q K^T / sqrt(dh) + mask) V` applied per
    /// sample and head, with the same `seq x seq` additive mask everywhere.
    pub fn attention(&mut self, q: Var, k: Var, v: Var, mask: Option<&AttnMask>, shape: AttnShape) -> Var {
        let AttnShape { batch, seq, heads } = shape;
        let (qv, kv, vv) = (self.value(q), self.value(k), self.value(v));
        let d = qv.cols;
        assert_eq!(qv.rows, batch * seq, "attention rows must be batch * seq");
        assert_eq!(kv.shape(), qv.shape());
        assert_eq!(vv.shape(), qv.shape());
        assert_eq!(d % heads, 0, "width must divide into heads");
        if let Some(m) = mask {
            assert_eq!(m.len(), seq * seq);
        }
        let dh = d / heads;
        let inv = 1.0 / (dh as f64).sqrt();
        let pattern = Rc::new(Pattern::new(seq, mask.map(|m| m.as_slice())));
        let nnz = pattern.nnz();
        let mut probs = vec![0.0; batch * heads * nnz];
        let mut out = Mat::zeros(batch * seq, d);
        for b in 0..batch {
            for h in 0..heads {
                let off = h * dh;
                let p = &mut probs[(b * heads + h) * nnz..][..nnz];
                for i in 0..seq {
                    let qi = &qv.row(b * seq + i)[off..off + dh];
                    let range = pattern.row_range(i);
                    let cols = &pattern.cols[range.clone()];
                    let prow = &mut p[range];
                    for (w, &j) in prow.iter_mut().zip(cols) {
                        let kj = &kv.row(b * seq + j)[off..off + dh];
                        *w = qi.iter().zip(kj).map(|(a, c)| a * c).sum::<f64>() * inv;
                    }
                    softmax_in_place(prow);
                    let orow = &mut out.data[(b * seq + i) * d + off..][..dh];
                    for (&w, &j) in prow.iter().zip(cols) {
                        let vj = &vv.row(b * seq + j)[off..off + dh];
                        for (o, x) in orow.iter_mut().zip(vj) {
                            *o += w * x;
                        }
                    }
                }
            }
        }
        self.push(
            out,
            Op::Attention {
                q,
                k,
                v,
                shape,
                pattern,
                probs,
            },
        )
    }

    /// Row `r` of the output is `scales[r] * w[r % w.rows]`.
    pub fn row_scale(&mut self, w: Var, scales: Rc<Vec<f64>>) -> Var {
        let wv = self.value(w);
        assert_eq!(scales.len() % wv.rows, 0);
        let mut out = Mat::zeros(scales.len(), wv.cols);
        for (r, &s) in scales.iter().enumerate() {
            for (o, x) in out.row_mut(r).iter_mut().zip(wv.row(r % wv.rows)) {
                *o = s * x;
            }
        }
        self.push(out, Op::RowScale { w, scales })
    }

    pub fn embedding(&mut self, table: Var, ids: Rc<Vec<usize>>) -> Var {
        let tv = self.value(table);
        let mut out = Mat::zeros(ids.len(), tv.cols);
        for (r, &id) in ids.iter().enumerate() {
            out.row_mut(r).copy_from_slice(tv.row(id));
        }
        self.push(out, Op::Embedding { table, ids })
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows;
        let cols: usize = parts.iter().map(|&p| self.value(p).cols).sum();
        let mut out = Mat::zeros(rows, cols);
        let mut off = 0;
        for &p in parts {
            let pv = self.value(p);
            assert_eq!(pv.rows, rows, "concat needs equal row counts");
            for r in 0..rows {
                out.row_mut(r)[off..off + pv.cols].copy_from_slice(pv.row(r));
            }
            off += pv.cols;
        }
        self.push(out, Op::ConcatCols(parts.to_vec()))
    }

    pub fn reshape(&mut self, x: Var, rows: usize, cols: usize) -> Var {
        let xv = self.value(x);
        assert_eq!(xv.len(), rows * cols);
        let out = Mat::from_vec(rows, cols, xv.data.clone());
        self.push(out, Op::Reshape(x))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data.iter().sum();
        self.push(Mat::scalar(s), Op::Sum(x))
    }

    /// Mean binary cross-entropy between `sigmoid(logits)` and `targets`.
    pub fn bce_with_logits(&mut self, logits: Var, targets: Rc<Mat>) -> Var {
        let lv = self.value(logits);
        assert_eq!(lv.shape(), targets.shape());
        let total: f64 = lv
            .data
            .iter()
            .zip(&targets.data)
            .map(|(&x, &t)| x.max(0.0) - x * t + (-x.abs()).exp().ln_1p())
            .sum();
        let out = Mat::scalar(total / lv.len() as f64);
        self.push(out, Op::BceWithLogits { logits, targets })
    }

    /// Mean categorical cross-entropy (nats) of row-wise softmax against
    /// target class indices.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: Rc<Vec<usize>>) -> Var {
        let mut probs = self.value(logits).clone();
        assert_eq!(probs.rows, targets.len());
        let mut total = 0.0;
        for (r, &t) in targets.iter().enumerate() {
            let row = probs.row_mut(r);
            softmax_in_place(row);
            total -= row[t].max(f64::MIN_POSITIVE).ln();
        }
        let out = Mat::scalar(total / targets.len() as f64);
        self.push(out, Op::SoftmaxCrossEntropy { logits, targets, probs })
    }

    /// Reverse pass from the scalar node `loss`.
    pub fn backward(&mut self, loss: Var) {
        assert_eq!(self.value(loss).shape(), (1, 1), "backward needs a scalar");
        let mut grads: Vec<Option<Mat>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Mat::scalar(1.0));

        fn acc(grads: &mut [Option<Mat>], v: Var, g: Mat) {
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&g),
                slot => *slot = Some(g),
            }
        }

        for i in (0..=loss.0).rev() {
            let Some(dy) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            let val = |v: Var| &self.nodes[v.0].value;
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let (av, bv) = (val(*a), val(*b));
                    let mut da = Mat::zeros(av.rows, av.cols);
                    gemm(1.0, &dy, false, bv, true, 0.0, &mut da);
                    let mut db = Mat::zeros(bv.rows, bv.cols);
                    gemm(1.0, av, true, &dy, false, 0.0, &mut db);
                    acc(&mut grads, *a, da);
                    acc(&mut grads, *b, db);
                }
                Op::Transpose(a) => acc(&mut grads, *a, dy.transpose()),
                Op::Add(a, b) => {
                    acc(&mut grads, *a, dy.clone());
                    acc(&mut grads, *b, dy.clone());
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (val(*a), val(*b));
                    let da = dy.data.iter().zip(&bv.data).map(|(g, y)| g * y).collect();
                    let db = dy.data.iter().zip(&av.data).map(|(g, x)| g * x).collect();
                    acc(&mut grads, *a, Mat::from_vec(dy.rows, dy.cols, da));
                    acc(&mut grads, *b, Mat::from_vec(dy.rows, dy.cols, db));
                }
                Op::AddRow(x, bias) => {
                    let mut db = Mat::zeros(1, dy.cols);
                    for r in 0..dy.rows {
                        for (o, g) in db.data.iter_mut().zip(dy.row(r)) {
                            *o += g;
                        }
                    }
                    acc(&mut grads, *bias, db);
                    acc(&mut grads, *x, dy.clone());
                }
                Op::AddTiled(x, p) => {
                    let pv = val(*p);
                    let mut dp = Mat::zeros(pv.rows, pv.cols);
                    for r in 0..dy.rows {
                        for (o, g) in dp.row_mut(r % pv.rows).iter_mut().zip(dy.row(r)) {
                            *o += g;
                        }
                    }
                    acc(&mut grads, *p, dp);
                    acc(&mut grads, *x, dy.clone());
                }
                Op::Scale(x, s) => acc(&mut grads, *x, dy.map(|g| g * s)),
                Op::Sigmoid(x) => {
                    let y = &node.value;
                    let d = dy.data.iter().zip(&y.data).map(|(g, s)| g * s * (1.0 - s)).collect();
                    acc(&mut grads, *x, Mat::from_vec(dy.rows, dy.cols, d));
                }
                Op::Gelu { x, tanh } => {
                    let xv = val(*x);
                    let d = dy
                        .data
                        .iter()
                        .zip(&xv.data)
                        .zip(tanh)
                        .map(|((g, &v), &t)| {
                            let du = GELU_C * (1.0 + 3.0 * GELU_A * v * v);
                            g * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du)
                        })
                        .collect();
                    acc(&mut grads, *x, Mat::from_vec(dy.rows, dy.cols, d));
                }
                Op::LayerNorm {
                    x,
                    gamma,
                    beta,
                    xhat,
                    rstd,
                } => {
                    let (rows, cols) = dy.shape();
                    let g = &val(*gamma).data;
                    let mut dg = Mat::zeros(1, cols);
                    let mut db = Mat::zeros(1, cols);
                    let mut dx = Mat::zeros(rows, cols);
                    let n = cols as f64;
                    for r in 0..rows {
                        let dyr = dy.row(r);
                        let xh = &xhat[r * cols..(r + 1) * cols];
                        let mut sum_d = 0.0;
                        let mut sum_dx = 0.0;
                        for c in 0..cols {
                            dg.data[c] += dyr[c] * xh[c];
                            db.data[c] += dyr[c];
                            let d = dyr[c] * g[c];
                            sum_d += d;
                            sum_dx += d * xh[c];
                        }
                        let dxr = dx.row_mut(r);
                        for c in 0..cols {
                            let d = dyr[c] * g[c];
                            dxr[c] = rstd[r] / n * (n * d - sum_d - xh[c] * sum_dx);
                        }
                    }
                    acc(&mut grads, *x, dx);
                    acc(&mut grads, *gamma, dg);
                    acc(&mut grads, *beta, db);
                }
                Op::MaskedSoftmax(x) => {
                    let y = &node.value;
                    let mut dx = Mat::zeros(dy.rows, dy.cols);
                    for r in 0..dy.rows {
                        let (yr, gr) = (y.row(r), dy.row(r));
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for (o, (a, b)) in dx.row_mut(r).iter_mut().zip(yr.iter().zip(gr)) {
                            *o = a * (b - dot);
                        }
                    }
                    acc(&mut grads, *x, dx);
                }
                Op::Attention {
                    q,
                    k,
                    v,
                    shape,
                    pattern,
                    probs,
                } => {
                    let AttnShape { batch, seq, heads } = *shape;
                    let (qv, kv, vv) = (val(*q), val(*k), val(*v));
                    let d = qv.cols;
                    let dh = d / heads;
                    let inv = 1.0 / (dh as f64).sqrt();
                    let nnz = pattern.nnz();
                    let mut dq = Mat::zeros(qv.rows, d);
                    let mut dk = Mat::zeros(qv.rows, d);
                    let mut dv = Mat::zeros(qv.rows, d);
                    let mut ds = vec![0.0; seq];
                    for b in 0..batch {
                        for h in 0..heads {
                            let off = h * dh;
                            let p = &probs[(b * heads + h) * nnz..][..nnz];
                            for i in 0..seq {
                                let range = pattern.row_range(i);
                                let cols = &pattern.cols[range.clone()];
                                let prow = &p[range];
                                let doi = &dy.row(b * seq + i)[off..off + dh];
                                // dP_ij = dO_i . V_j ; dV_j += P_ij dO_i
                                let mut dot = 0.0;
                                for (e, (&w, &j)) in prow.iter().zip(cols).enumerate() {
                                    let vj = &vv.row(b * seq + j)[off..off + dh];
                                    let dp: f64 = doi.iter().zip(vj).map(|(a, c)| a * c).sum();
                                    ds[e] = dp;
                                    dot += w * dp;
                                    let dvj = &mut dv.data[(b * seq + j) * d + off..][..dh];
                                    for (o, g) in dvj.iter_mut().zip(doi) {
                                        *o += w * g;
                                    }
                                }
                                let qi = &qv.row(b * seq + i)[off..off + dh];
                                for (e, (&w, &j)) in prow.iter().zip(cols).enumerate() {
                                    let s = w * (ds[e] - dot) * inv;
                                    if s == 0.0 {
                                        continue;
                                    }
                                    let kj = &kv.row(b * seq + j)[off..off + dh];
                                    let dqi = &mut dq.data[(b * seq + i) * d + off..][..dh];
                                    for (o, c) in dqi.iter_mut().zip(kj) {
                                        *o += s * c;
                                    }
                                    let dkj = &mut dk.data[(b * seq + j) * d + off..][..dh];
                                    for (o, c) in dkj.iter_mut().zip(qi) {
                                        *o += s * c;
                                    }
                                }
                            }
                        }
                    }
                    acc(&mut grads, *q, dq);
                    acc(&mut grads, *k, dk);
                    acc(&mut grads, *v, dv);
                }
                Op::RowScale { w, scales } => {
                    let wv = val(*w);
                    let mut dw = Mat::zeros(wv.rows, wv.cols);
                    for (r, &s) in scales.iter().enumerate() {
                        for (o, g) in dw.row_mut(r % wv.rows).iter_mut().zip(dy.row(r)) {
                            *o += s * g;
                        }
                    }
                    acc(&mut grads, *w, dw);
                }
                Op::Embedding { table, ids } => {
                    let tv = val(*table);
                    let mut dt = Mat::zeros(tv.rows, tv.cols);
                    for (r, &id) in ids.iter().enumerate() {
                        for (o, g) in dt.row_mut(id).iter_mut().zip(dy.row(r)) {
                            *o += g;
                        }
                    }
                    acc(&mut grads, *table, dt);
                }
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let cols = val(p).cols;
                        let mut dp = Mat::zeros(dy.rows, cols);
                        for r in 0..dy.rows {
                            dp.row_mut(r).copy_from_slice(&dy.row(r)[off..off + cols]);
                        }
                        off += cols;
                        acc(&mut grads, p, dp);
                    }
                }
                Op::Reshape(x) => {
                    let xv = val(*x);
                    acc(&mut grads, *x, Mat::from_vec(xv.rows, xv.cols, dy.data.clone()));
                }
                Op::Sum(x) => {
                    let xv = val(*x);
                    acc(&mut grads, *x, Mat::filled(xv.rows, xv.cols, dy.data[0]));
                }
                Op::BceWithLogits { logits, targets } => {
                    let lv = val(*logits);
                    let scale = dy.data[0] / lv.len() as f64;
                    let d = lv
                        .data
                        .iter()
                        .zip(&targets.data)
                        .map(|(&x, &t)| (sigmoid(x) - t) * scale)
                        .collect();
                    acc(&mut grads, *logits, Mat::from_vec(lv.rows, lv.cols, d));
                }
                Op::SoftmaxCrossEntropy { logits, targets, probs } => {
                    let scale = dy.data[0] / targets.len() as f64;
                    let mut d = probs.clone();
                    for (r, &t) in targets.iter().enumerate() {
                        *d.at_mut(r, t) -= 1.0;
                    }
                    d.data.iter_mut().for_each(|x| *x *= scale);
                    acc(&mut grads, *logits, d);
                }
            }
            grads[i] = Some(dy);
        }
        self.grads = grads;
    }

    /// Registers a reusable attention mask under `key` so repeated layers
    /// share one allocation.
    pub fn cached_mask(&mut self, key: usize, build: impl FnOnce() -> Vec<f64>) -> AttnMask {
        self.masks.entry(key).or_insert_with(|| Rc::new(build())).clone()
    }
}
