//! Recorded computation graph and reverse-mode backward pass.

use std::rc::Rc;

use super::ops;
use super::{Result, Tensor, TensorError};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TensorId(pub(crate) usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Constant,
    MatMul { a: usize, b: usize },
    Add { a: usize, b: usize },
    Sub { a: usize, b: usize },
    Mul { a: usize, b: usize },
    Tanh { x: usize },
    Sigmoid { x: usize },
    LeakyRelu { x: usize, slope: f64 },
    Abs { x: usize },
    Ln { x: usize },
    Scale { x: usize, k: f64 },
    Conv2d { x: usize, w: usize, stride: usize, pad: usize },
    BiasAddChan { x: usize, bias: usize },
    Upsample { x: usize, factor: usize },
    Reshape { x: usize },
    Concat { parts: Vec<usize>, axis: usize },
    SliceRows { x: usize, start: usize },
    SumAll { x: usize },
    MeanAll { x: usize },
    BceWithLogit { logit: usize, target: f64 },
}

struct Node {
    data: Rc<Vec<f64>>,
    shape: Vec<usize>,
    op: Op,
    needs_grad: bool,
}

/// Loss kinds offered by [`Tape::loss`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossKind {
    Mse,
    Mae,
    MseMae,
    Bce,
}

/// One tape per training step: record forward ops, call [`Tape::backward`]
/// once, read gradients, drop.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Per-node gradients produced by [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient of the loss w.r.t. the given node, if the node required one.
    pub fn get(&self, id: TensorId) -> Option<&[f64]> {
        self.grads.get(id.0).and_then(|g| g.as_deref())
    }
}

fn ensure_finite(op: &'static str, data: &[f64]) -> Result<()> {
    if data.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(TensorError::NonFinite { op })
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: TensorId) -> &[f64] {
        &self.nodes[id.0].data
    }

    pub fn shape(&self, id: TensorId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    /// Extracts a node's value as a standalone [`Tensor`] (shares storage).
    pub fn detach(&self, id: TensorId) -> Tensor {
        let n = &self.nodes[id.0];
        Tensor::from_storage(Rc::clone(&n.data), &n.shape).expect("node shape is consistent")
    }

    /// Records an external tensor. Gradients flow into it iff the tensor has
    /// `requires_grad` set.
    pub fn leaf(&mut self, t: &Tensor) -> TensorId {
        self.push(t.storage(), t.shape().to_vec(), Op::Leaf, t.requires_grad)
    }

    /// Records an external tensor with gradient tracking disabled, whatever
    /// its `requires_grad` flag says. Used for frozen weights and detached
    /// values.
    pub fn leaf_frozen(&mut self, t: &Tensor) -> TensorId {
        self.push(t.storage(), t.shape().to_vec(), Op::Leaf, false)
    }

    /// Records a constant that never receives gradients.
    pub fn constant(&mut self, data: Vec<f64>, shape: &[usize]) -> Result<TensorId> {
        let t = Tensor::new(data, shape)?;
        Ok(self.push(t.storage(), shape.to_vec(), Op::Constant, false))
    }

    pub fn zeros(&mut self, shape: &[usize]) -> TensorId {
        let numel: usize = shape.iter().product();
        self.push(
            Rc::new(vec![0.0; numel]),
            shape.to_vec(),
            Op::Constant,
            false,
        )
    }

    fn push(&mut self, data: Rc<Vec<f64>>, shape: Vec<usize>, op: Op, needs_grad: bool) -> TensorId {
        self.nodes.push(Node {
            data,
            shape,
            op,
            needs_grad,
        });
        TensorId(self.nodes.len() - 1)
    }

    fn needs(&self, ids: &[usize]) -> bool {
        ids.iter().any(|&i| self.nodes[i].needs_grad)
    }

    // ── binary ops ──────────────────────────────────────────────────────

    pub fn matmul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let (sa, sb) = (&self.nodes[a.0].shape, &self.nodes[b.0].shape);
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                detail: format!("{sa:?} × {sb:?}"),
            });
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        ops::gemm_acc(
            m,
            k,
            n,
            &self.nodes[a.0].data,
            false,
            &self.nodes[b.0].data,
            false,
            &mut out,
        );
        ensure_finite("matmul", &out)?;
        let needs = self.needs(&[a.0, b.0]);
        Ok(self.push(
            Rc::new(out),
            vec![m, n],
            Op::MatMul { a: a.0, b: b.0 },
            needs,
        ))
    }

    fn elementwise_binary(
        &mut self,
        name: &'static str,
        a: TensorId,
        b: TensorId,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<TensorId> {
        if self.nodes[a.0].shape != self.nodes[b.0].shape {
            return Err(TensorError::ShapeMismatch {
                op: name,
                detail: format!(
                    "{:?} vs {:?}",
                    self.nodes[a.0].shape, self.nodes[b.0].shape
                ),
            });
        }
        let out: Vec<f64> = self.nodes[a.0]
            .data
            .iter()
            .zip(self.nodes[b.0].data.iter())
            .map(|(&x, &y)| f(x, y))
            .collect();
        ensure_finite(name, &out)?;
        let shape = self.nodes[a.0].shape.clone();
        let needs = self.needs(&[a.0, b.0]);
        Ok(self.push(Rc::new(out), shape, op, needs))
    }

    pub fn add(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        self.elementwise_binary("add", a, b, |x, y| x + y, Op::Add { a: a.0, b: b.0 })
    }

    pub fn sub(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        self.elementwise_binary("sub", a, b, |x, y| x - y, Op::Sub { a: a.0, b: b.0 })
    }

    pub fn mul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        self.elementwise_binary("mul", a, b, |x, y| x * y, Op::Mul { a: a.0, b: b.0 })
    }

    // ── unary ops ───────────────────────────────────────────────────────

    fn elementwise_unary(
        &mut self,
        name: &'static str,
        x: TensorId,
        f: impl Fn(f64) -> f64,
        op: Op,
    ) -> Result<TensorId> {
        let out: Vec<f64> = self.nodes[x.0].data.iter().map(|&v| f(v)).collect();
        ensure_finite(name, &out)?;
        let shape = self.nodes[x.0].shape.clone();
        let needs = self.nodes[x.0].needs_grad;
        Ok(self.push(Rc::new(out), shape, op, needs))
    }

    pub fn tanh(&mut self, x: TensorId) -> Result<TensorId> {
        self.elementwise_unary("tanh", x, f64::tanh, Op::Tanh { x: x.0 })
    }

    pub fn sigmoid(&mut self, x: TensorId) -> Result<TensorId> {
        self.elementwise_unary("sigmoid", x, sigmoid, Op::Sigmoid { x: x.0 })
    }

    pub fn leaky_relu(&mut self, x: TensorId, slope: f64) -> Result<TensorId> {
        if !(0.0..1.0).contains(&slope) || slope == 0.0 {
            return Err(TensorError::InvalidAttr {
                op: "leaky_relu",
                detail: format!("slope {slope} not in (0, 1)"),
            });
        }
        self.elementwise_unary(
            "leaky_relu",
            x,
            |v| if v >= 0.0 { v } else { slope * v },
            Op::LeakyRelu { x: x.0, slope },
        )
    }

    pub fn abs(&mut self, x: TensorId) -> Result<TensorId> {
        self.elementwise_unary("abs", x, f64::abs, Op::Abs { x: x.0 })
    }

    pub fn ln(&mut self, x: TensorId) -> Result<TensorId> {
        self.elementwise_unary("ln", x, f64::ln, Op::Ln { x: x.0 })
    }

    pub fn scale(&mut self, x: TensorId, k: f64) -> Result<TensorId> {
        self.elementwise_unary("scale", x, |v| k * v, Op::Scale { x: x.0, k })
    }

    // ── structural ops ──────────────────────────────────────────────────

    pub fn reshape(&mut self, x: TensorId, shape: &[usize]) -> Result<TensorId> {
        let numel: usize = shape.iter().product();
        if numel != self.nodes[x.0].data.len() {
            return Err(TensorError::ShapeMismatch {
                op: "reshape",
                detail: format!("{:?} → {:?}", self.nodes[x.0].shape, shape),
            });
        }
        let data = Rc::clone(&self.nodes[x.0].data);
        let needs = self.nodes[x.0].needs_grad;
        Ok(self.push(data, shape.to_vec(), Op::Reshape { x: x.0 }, needs))
    }

    pub fn concat(&mut self, parts: &[TensorId], axis: usize) -> Result<TensorId> {
        if parts.is_empty() {
            return Err(TensorError::InvalidAttr {
                op: "concat",
                detail: "no inputs".into(),
            });
        }
        let first = self.nodes[parts[0].0].shape.clone();
        if axis >= first.len() {
            return Err(TensorError::InvalidAttr {
                op: "concat",
                detail: format!("axis {axis} for rank {}", first.len()),
            });
        }
        let mut axis_total = 0;
        for p in parts {
            let s = &self.nodes[p.0].shape;
            if s.len() != first.len()
                || s.iter()
                    .zip(&first)
                    .enumerate()
                    .any(|(i, (a, b))| i != axis && a != b)
            {
                return Err(TensorError::ShapeMismatch {
                    op: "concat",
                    detail: format!("{s:?} vs {first:?} along axis {axis}"),
                });
            }
            axis_total += s[axis];
        }
        let mut out_shape = first.clone();
        out_shape[axis] = axis_total;
        let outer: usize = first[..axis].iter().product();
        let inner: usize = first[axis + 1..].iter().product();
        let mut out = vec![0.0; outer * axis_total * inner];
        for o in 0..outer {
            let mut off = 0;
            for p in parts {
                let n = &self.nodes[p.0];
                let ax = n.shape[axis];
                let block = ax * inner;
                out[o * axis_total * inner + off..o * axis_total * inner + off + block]
                    .copy_from_slice(&n.data[o * block..(o + 1) * block]);
                off += block;
            }
        }
        let ids: Vec<usize> = parts.iter().map(|p| p.0).collect();
        let needs = self.needs(&ids);
        Ok(self.push(
            Rc::new(out),
            out_shape,
            Op::Concat { parts: ids, axis },
            needs,
        ))
    }

    /// Rows `[start, end)` of a 2-D tensor.
    pub fn slice_rows(&mut self, x: TensorId, start: usize, end: usize) -> Result<TensorId> {
        let s = &self.nodes[x.0].shape;
        if s.len() != 2 || start >= end || end > s[0] {
            return Err(TensorError::ShapeMismatch {
                op: "slice_rows",
                detail: format!("rows {start}..{end} of {s:?}"),
            });
        }
        let cols = s[1];
        let out = self.nodes[x.0].data[start * cols..end * cols].to_vec();
        let needs = self.nodes[x.0].needs_grad;
        Ok(self.push(
            Rc::new(out),
            vec![end - start, cols],
            Op::SliceRows { x: x.0, start },
            needs,
        ))
    }

    // ── convolution family ──────────────────────────────────────────────

    /// 2-D convolution with zero padding. `x`: [c_in, h, w], `w`: [c_out,
    /// c_in, kh, kw].
    pub fn conv2d(&mut self, x: TensorId, w: TensorId, stride: usize, pad: usize) -> Result<TensorId> {
        if stride < 1 {
            return Err(TensorError::InvalidAttr {
                op: "conv2d",
                detail: "stride must be ≥ 1".into(),
            });
        }
        let (sx, sw) = (&self.nodes[x.0].shape, &self.nodes[w.0].shape);
        if sx.len() != 3 || sw.len() != 4 || sx[0] != sw[1] {
            return Err(TensorError::ShapeMismatch {
                op: "conv2d",
                detail: format!("input {sx:?}, kernel {sw:?}"),
            });
        }
        let (cin, h, wd) = (sx[0], sx[1], sx[2]);
        let (cout, kh, kw) = (sw[0], sw[2], sw[3]);
        let oh = ops::conv_out_dim(h, kh, stride, pad).ok_or(TensorError::ShapeMismatch {
            op: "conv2d",
            detail: format!("kernel {kh} too large for input {h} with pad {pad}"),
        })?;
        let ow = ops::conv_out_dim(wd, kw, stride, pad).ok_or(TensorError::ShapeMismatch {
            op: "conv2d",
            detail: format!("kernel {kw} too large for input {wd} with pad {pad}"),
        })?;
        let mut out = vec![0.0; cout * oh * ow];
        ops::conv2d_forward(
            &self.nodes[x.0].data,
            &self.nodes[w.0].data,
            cin,
            h,
            wd,
            cout,
            kh,
            kw,
            stride,
            pad,
            oh,
            ow,
            &mut out,
        );
        ensure_finite("conv2d", &out)?;
        let needs = self.needs(&[x.0, w.0]);
        Ok(self.push(
            Rc::new(out),
            vec![cout, oh, ow],
            Op::Conv2d {
                x: x.0,
                w: w.0,
                stride,
                pad,
            },
            needs,
        ))
    }

    /// Adds a per-channel bias `[c]` to a feature map `[c, h, w]`.
    pub fn bias_add_chan(&mut self, x: TensorId, bias: TensorId) -> Result<TensorId> {
        let (sx, sb) = (&self.nodes[x.0].shape, &self.nodes[bias.0].shape);
        if sx.len() != 3 || sb.len() != 1 || sb[0] != sx[0] {
            return Err(TensorError::ShapeMismatch {
                op: "bias_add_chan",
                detail: format!("input {sx:?}, bias {sb:?}"),
            });
        }
        let (c, h, w) = (sx[0], sx[1], sx[2]);
        let mut out = vec![0.0; c * h * w];
        for ch in 0..c {
            let b = self.nodes[bias.0].data[ch];
            for (o, &v) in out[ch * h * w..(ch + 1) * h * w]
                .iter_mut()
                .zip(&self.nodes[x.0].data[ch * h * w..(ch + 1) * h * w])
            {
                *o = v + b;
            }
        }
        ensure_finite("bias_add_chan", &out)?;
        let shape = sx.clone();
        let needs = self.needs(&[x.0, bias.0]);
        Ok(self.push(
            Rc::new(out),
            shape,
            Op::BiasAddChan {
                x: x.0,
                bias: bias.0,
            },
            needs,
        ))
    }

    pub fn upsample_nearest(&mut self, x: TensorId, factor: usize) -> Result<TensorId> {
        if factor < 1 {
            return Err(TensorError::InvalidAttr {
                op: "upsample",
                detail: "factor must be ≥ 1".into(),
            });
        }
        let s = &self.nodes[x.0].shape;
        if s.len() != 3 {
            return Err(TensorError::ShapeMismatch {
                op: "upsample",
                detail: format!("expected [c,h,w], got {s:?}"),
            });
        }
        let (c, h, w) = (s[0], s[1], s[2]);
        let mut out = vec![0.0; c * h * factor * w * factor];
        ops::upsample_forward(&self.nodes[x.0].data, c, h, w, factor, &mut out);
        let needs = self.nodes[x.0].needs_grad;
        Ok(self.push(
            Rc::new(out),
            vec![c, h * factor, w * factor],
            Op::Upsample {
                x: x.0,
                factor,
            },
            needs,
        ))
    }

    // ── reductions and losses ───────────────────────────────────────────

    pub fn sum_all(&mut self, x: TensorId) -> Result<TensorId> {
        let s: f64 = self.nodes[x.0].data.iter().sum();
        if !s.is_finite() {
            return Err(TensorError::NonFinite { op: "sum_all" });
        }
        let needs = self.nodes[x.0].needs_grad;
        Ok(self.push(Rc::new(vec![s]), vec![1], Op::SumAll { x: x.0 }, needs))
    }

    pub fn mean_all(&mut self, x: TensorId) -> Result<TensorId> {
        let n = self.nodes[x.0].data.len() as f64;
        let s: f64 = self.nodes[x.0].data.iter().sum::<f64>() / n;
        if !s.is_finite() {
            return Err(TensorError::NonFinite { op: "mean_all" });
        }
        let needs = self.nodes[x.0].needs_grad;
        Ok(self.push(Rc::new(vec![s]), vec![1], Op::MeanAll { x: x.0 }, needs))
    }

    /// Numerically stable binary cross-entropy on a scalar logit against a
    /// constant 0/1 target: equals `bce(sigmoid(logit), target)`.
    pub fn bce_with_logit(&mut self, logit: TensorId, target: f64) -> Result<TensorId> {
        if self.nodes[logit.0].data.len() != 1 {
            return Err(TensorError::ShapeMismatch {
                op: "bce_with_logit",
                detail: format!("logit shape {:?}", self.nodes[logit.0].shape),
            });
        }
        let z = self.nodes[logit.0].data[0];
        let loss = softplus(-z) + (1.0 - target) * z;
        if !loss.is_finite() {
            return Err(TensorError::NonFinite { op: "bce_with_logit" });
        }
        let needs = self.nodes[logit.0].needs_grad;
        Ok(self.push(
            Rc::new(vec![loss]),
            vec![1],
            Op::BceWithLogit {
                logit: logit.0,
                target,
            },
            needs,
        ))
    }

    /// Scalar loss between a prediction and target of identical shape.
    pub fn loss(&mut self, kind: LossKind, pred: TensorId, target: TensorId) -> Result<TensorId> {
        if self.nodes[pred.0].shape != self.nodes[target.0].shape {
            return Err(TensorError::ShapeMismatch {
                op: "loss",
                detail: format!(
                    "prediction {:?} vs target {:?}",
                    self.nodes[pred.0].shape, self.nodes[target.0].shape
                ),
            });
        }
        let n = self.nodes[pred.0].data.len() as f64;
        match kind {
            LossKind::Mse => {
                let d = self.sub(pred, target)?;
                let sq = self.mul(d, d)?;
                let s = self.sum_all(sq)?;
                self.scale(s, 1.0 / n)
            }
            LossKind::Mae => {
                let d = self.sub(pred, target)?;
                let a = self.abs(d)?;
                let s = self.sum_all(a)?;
                self.scale(s, 1.0 / n)
            }
            LossKind::MseMae => {
                let m = self.loss(LossKind::Mse, pred, target)?;
                let a = self.loss(LossKind::Mae, pred, target)?;
                self.add(m, a)
            }
            LossKind::Bce => {
                if self.nodes[pred.0].data.iter().any(|&p| p <= 0.0 || p >= 1.0) {
                    return Err(TensorError::BceDomain);
                }
                let shape = self.nodes[pred.0].shape.clone();
                let numel = self.nodes[pred.0].data.len();
                let ones = self.constant(vec![1.0; numel], &shape)?;
                let ln_p = self.ln(pred)?;
                let one_minus_p = self.sub(ones, pred)?;
                let ln_q = self.ln(one_minus_p)?;
                let one_minus_y = self.sub(ones, target)?;
                let t1 = self.mul(target, ln_p)?;
                let t2 = self.mul(one_minus_y, ln_q)?;
                let s = self.add(t1, t2)?;
                let total = self.sum_all(s)?;
                self.scale(total, -1.0 / n)
            }
        }
    }

    // ── backward ────────────────────────────────────────────────────────

    /// Reverse sweep from a scalar loss. Every `requires_grad` leaf gets a
    /// gradient; leaves unreachable from the loss get zeros.
    pub fn backward(&self, loss: TensorId) -> Result<Gradients> {
        let ln = &self.nodes[loss.0];
        if ln.data.len() != 1 {
            return Err(TensorError::LossNotScalar(ln.shape.clone()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = Vec::with_capacity(self.nodes.len());
        grads.resize_with(self.nodes.len(), || None);
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].needs_grad {
                continue;
            }
            let Some(gy) = grads[idx].take() else { continue };
            self.accumulate(idx, &gy, &mut grads);
            grads[idx] = Some(gy);
        }

        // Zero-fill unreachable requires-grad leaves.
        for (idx, node) in self.nodes.iter().enumerate() {
            if matches!(node.op, Op::Leaf) && node.needs_grad && grads[idx].is_none() {
                grads[idx] = Some(vec![0.0; node.data.len()]);
            }
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, idx: usize, gy: &[f64], grads: &mut Vec<Option<Vec<f64>>>) {
        macro_rules! buf {
            ($i:expr) => {
                grads[$i].get_or_insert_with(|| vec![0.0; self.nodes[$i].data.len()])
            };
        }
        let node = &self.nodes[idx];
        match &node.op {
            Op::Leaf | Op::Constant => {}
            Op::MatMul { a, b } => {
                let (m, k) = (self.nodes[*a].shape[0], self.nodes[*a].shape[1]);
                let n = self.nodes[*b].shape[1];
                if self.nodes[*a].needs_grad {
                    // dA += dC · Bᵀ
                    ops::gemm_acc(m, n, k, gy, false, &self.nodes[*b].data, true, buf!(*a));
                }
                if self.nodes[*b].needs_grad {
                    // dB += Aᵀ · dC
                    ops::gemm_acc(k, m, n, &self.nodes[*a].data, true, gy, false, buf!(*b));
                }
            }
            Op::Add { a, b } => {
                if self.nodes[*a].needs_grad {
                    for (d, &g) in buf!(*a).iter_mut().zip(gy) {
                        *d += g;
                    }
                }
                if self.nodes[*b].needs_grad {
                    for (d, &g) in buf!(*b).iter_mut().zip(gy) {
                        *d += g;
                    }
                }
            }
            Op::Sub { a, b } => {
                if self.nodes[*a].needs_grad {
                    for (d, &g) in buf!(*a).iter_mut().zip(gy) {
                        *d += g;
                    }
                }
                if self.nodes[*b].needs_grad {
                    for (d, &g) in buf!(*b).iter_mut().zip(gy) {
                        *d -= g;
                    }
                }
            }
            Op::Mul { a, b } => {
                if self.nodes[*a].needs_grad {
                    let bv = Rc::clone(&self.nodes[*b].data);
                    for ((d, &g), &v) in buf!(*a).iter_mut().zip(gy).zip(bv.iter()) {
                        *d += g * v;
                    }
                }
                if self.nodes[*b].needs_grad {
                    let av = Rc::clone(&self.nodes[*a].data);
                    for ((d, &g), &v) in buf!(*b).iter_mut().zip(gy).zip(av.iter()) {
                        *d += g * v;
                    }
                }
            }
            Op::Tanh { x } => {
                if self.nodes[*x].needs_grad {
                    let y = Rc::clone(&node.data);
                    for ((d, &g), &yv) in buf!(*x).iter_mut().zip(gy).zip(y.iter()) {
                        *d += g * (1.0 - yv * yv);
                    }
                }
            }
            Op::Sigmoid { x } => {
                if self.nodes[*x].needs_grad {
                    let y = Rc::clone(&node.data);
                    for ((d, &g), &yv) in buf!(*x).iter_mut().zip(gy).zip(y.iter()) {
                        *d += g * yv * (1.0 - yv);
                    }
                }
            }
            Op::LeakyRelu { x, slope } => {
                if self.nodes[*x].needs_grad {
                    let xv = Rc::clone(&self.nodes[*x].data);
                    for ((d, &g), &v) in buf!(*x).iter_mut().zip(gy).zip(xv.iter()) {
                        *d += g * if v >= 0.0 { 1.0 } else { *slope };
                    }
                }
            }
            Op::Abs { x } => {
                if self.nodes[*x].needs_grad {
                    let xv = Rc::clone(&self.nodes[*x].data);
                    for ((d, &g), &v) in buf!(*x).iter_mut().zip(gy).zip(xv.iter()) {
                        *d += g * if v >= 0.0 { 1.0 } else { -1.0 };
                    }
                }
            }
            Op::Ln { x } => {
                if self.nodes[*x].needs_grad {
                    let xv = Rc::clone(&self.nodes[*x].data);
                    for ((d, &g), &v) in buf!(*x).iter_mut().zip(gy).zip(xv.iter()) {
                        *d += g / v;
                    }
                }
            }
            Op::Scale { x, k } => {
                if self.nodes[*x].needs_grad {
                    for (d, &g) in buf!(*x).iter_mut().zip(gy) {
                        *d += k * g;
                    }
                }
            }
            Op::Conv2d { x, w, stride, pad } => {
                let sx = &self.nodes[*x].shape;
                let sw = &self.nodes[*w].shape;
                let so = &node.shape;
                let xd = Rc::clone(&self.nodes[*x].data);
                let wd = Rc::clone(&self.nodes[*w].data);
                let want_dx = self.nodes[*x].needs_grad;
                let want_dw = self.nodes[*w].needs_grad;
                // split the two mutable borrows
                if want_dx {
                    let _ = buf!(*x);
                }
                if want_dw {
                    let _ = buf!(*w);
                }
                let (dx, dw) = split_two(grads, *x, *w);
                ops::conv2d_backward(
                    &xd,
                    &wd,
                    gy,
                    sx[0],
                    sx[1],
                    sx[2],
                    sw[0],
                    sw[2],
                    sw[3],
                    *stride,
                    *pad,
                    so[1],
                    so[2],
                    if want_dx { dx } else { None },
                    if want_dw { dw } else { None },
                );
            }
            Op::BiasAddChan { x, bias } => {
                let (c, hw) = (node.shape[0], node.shape[1] * node.shape[2]);
                if self.nodes[*x].needs_grad {
                    for (d, &g) in buf!(*x).iter_mut().zip(gy) {
                        *d += g;
                    }
                }
                if self.nodes[*bias].needs_grad {
                    let db = buf!(*bias);
                    for ch in 0..c {
                        db[ch] += gy[ch * hw..(ch + 1) * hw].iter().sum::<f64>();
                    }
                }
            }
            Op::Upsample { x, factor } => {
                if self.nodes[*x].needs_grad {
                    let s = &self.nodes[*x].shape;
                    let (c, h, w) = (s[0], s[1], s[2]);
                    ops::upsample_backward(gy, c, h, w, *factor, buf!(*x));
                }
            }
            Op::Reshape { x } => {
                if self.nodes[*x].needs_grad {
                    for (d, &g) in buf!(*x).iter_mut().zip(gy) {
                        *d += g;
                    }
                }
            }
            Op::Concat { parts, axis } => {
                let axis_total = node.shape[*axis];
                let outer: usize = node.shape[..*axis].iter().product();
                let inner: usize = node.shape[*axis + 1..].iter().product();
                let mut off = 0;
                for &p in parts {
                    let pax = self.nodes[p].shape[*axis];
                    let block = pax * inner;
                    if self.nodes[p].needs_grad {
                        let dp = buf!(p);
                        for o in 0..outer {
                            let src = &gy[o * axis_total * inner + off
                                ..o * axis_total * inner + off + block];
                            for (d, &g) in dp[o * block..(o + 1) * block].iter_mut().zip(src) {
                                *d += g;
                            }
                        }
                    }
                    off += block;
                }
            }
            Op::SliceRows { x, start } => {
                if self.nodes[*x].needs_grad {
                    let cols = node.shape[1];
                    let rows = node.shape[0];
                    let dx = buf!(*x);
                    for (d, &g) in dx[start * cols..(start + rows) * cols].iter_mut().zip(gy) {
                        *d += g;
                    }
                }
            }
            Op::SumAll { x } => {
                if self.nodes[*x].needs_grad {
                    let g = gy[0];
                    for d in buf!(*x).iter_mut() {
                        *d += g;
                    }
                }
            }
            Op::MeanAll { x } => {
                if self.nodes[*x].needs_grad {
                    let g = gy[0] / self.nodes[*x].data.len() as f64;
                    for d in buf!(*x).iter_mut() {
                        *d += g;
                    }
                }
            }
            Op::BceWithLogit { logit, target } => {
                if self.nodes[*logit].needs_grad {
                    let z = self.nodes[*logit].data[0];
                    buf!(*logit)[0] += gy[0] * (sigmoid(z) - target);
                }
            }
        }
    }
}

fn split_two(
    grads: &mut [Option<Vec<f64>>],
    i: usize,
    j: usize,
) -> (Option<&mut [f64]>, Option<&mut [f64]>) {
    debug_assert_ne!(i, j);
    if i < j {
        let (lo, hi) = grads.split_at_mut(j);
        (lo[i].as_deref_mut(), hi[0].as_deref_mut())
    } else {
        let (lo, hi) = grads.split_at_mut(i);
        (hi[0].as_deref_mut(), lo[j].as_deref_mut())
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}
