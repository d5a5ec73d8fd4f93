//! Reverse-mode differentiation on an append-only tape.
//!
//! Values are computed eagerly as ops are recorded, so callers can branch on
//! intermediate results (hinge gating, zero-norm checks) while building the
//! graph. `backward` walks the tape in reverse, which is a valid reverse
//! topological order because parents always precede children.

use crate::error::{Error, Result};

use super::array::{Array, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(pub(crate) usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    /// a * x + b with f64 constants; backward only needs the slope.
    Affine { x: NodeId, a: f64 },
    MatMul(NodeId, NodeId),
    MatVec(NodeId, NodeId),
    Transpose(NodeId),
    /// Concatenation along axis 0; trailing dimensions must match.
    Concat0(Vec<NodeId>),
    /// Equal-length vectors stacked into a matrix.
    StackRows(Vec<NodeId>),
    /// Scalars gathered into a vector.
    StackScalars(Vec<NodeId>),
    SliceRows { x: NodeId, start: usize },
    GatherRows { x: NodeId, ids: Vec<usize> },
    Reshape(NodeId),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Softmax { x: NodeId, axis: usize },
    MaxAxis { x: NodeId, axis: usize, argmax: Vec<usize> },
    MeanAxis { x: NodeId, axis: usize },
    Mean(NodeId),
    Sum(NodeId),
    L2Norm(NodeId),
    Dot(NodeId, NodeId),
    Conv2dValid { input: NodeId, weight: NodeId, bias: NodeId },
    BceWithLogits { logit: NodeId, target: f64 },
    HingeGate { pos: NodeId, neg: NodeId, margin: f64 },
    #[cfg(test)]
    BrokenScale(NodeId),
}

pub struct Graph<T: Scalar> {
    values: Vec<Array<T>>,
    ops: Vec<Op>,
    grads: Vec<Option<Array<T>>>,
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Graph {
            values: Vec::new(),
            ops: Vec::new(),
            grads: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Array<T> {
        &self.values[id.0]
    }

    /// Gradient of the last `backward` target with respect to this node;
    /// zeros for nodes the loss does not reach.
    pub fn grad(&self, id: NodeId) -> Array<T> {
        match &self.grads[id.0] {
            Some(g) => g.clone(),
            None => Array::zeros(self.values[id.0].shape()),
        }
    }

    fn push(&mut self, op: Op, value: Array<T>, name: &'static str) -> Result<NodeId> {
        if !value.all_finite() {
            return Err(Error::NonFinite { op: name });
        }
        let id = NodeId(self.values.len());
        self.values.push(value);
        self.ops.push(op);
        self.grads.push(None);
        Ok(id)
    }

    pub fn leaf(&mut self, value: Array<T>) -> NodeId {
        let id = NodeId(self.values.len());
        self.values.push(value);
        self.ops.push(Op::Leaf);
        self.grads.push(None);
        id
    }

    fn shape_err(op: &'static str, shapes: &[&[usize]]) -> Error {
        Error::Shape {
            op,
            details: shapes
                .iter()
                .map(|s| format!("{s:?}"))
                .collect::<Vec<_>>()
                .join(" vs "),
        }
    }

    fn binary_same_shape(
        &mut self,
        name: &'static str,
        a: NodeId,
        b: NodeId,
        f: impl Fn(T, T) -> T,
        op: Op,
    ) -> Result<NodeId> {
        let (va, vb) = (&self.values[a.0], &self.values[b.0]);
        if va.shape() != vb.shape() {
            return Err(Self::shape_err(name, &[va.shape(), vb.shape()]));
        }
        let data = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let value = Array::from_vec(va.shape(), data)?;
        self.push(op, value, name)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_same_shape("add", a, b, |x, y| T::from_f64(x.to_f64() + y.to_f64()), Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_same_shape("sub", a, b, |x, y| T::from_f64(x.to_f64() - y.to_f64()), Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_same_shape("mul", a, b, |x, y| T::from_f64(x.to_f64() * y.to_f64()), Op::Mul(a, b))
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_same_shape("div", a, b, |x, y| T::from_f64(x.to_f64() / y.to_f64()), Op::Div(a, b))
    }

    pub fn affine(&mut self, x: NodeId, a: f64, b: f64) -> Result<NodeId> {
        let value = self.values[x.0].map(|v| T::from_f64(a * v.to_f64() + b));
        self.push(Op::Affine { x, a }, value, "affine")
    }

    pub fn scale(&mut self, x: NodeId, a: f64) -> Result<NodeId> {
        self.affine(x, a, 0.0)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (&self.values[a.0], &self.values[b.0]);
        if va.rank() != 2 || vb.rank() != 2 || va.cols() != vb.rows() {
            return Err(Self::shape_err("matmul", &[va.shape(), vb.shape()]));
        }
        let value = matmul_arrays(va, vb);
        self.push(Op::MatMul(a, b), value, "matmul")
    }

    pub fn matvec(&mut self, w: NodeId, x: NodeId) -> Result<NodeId> {
        let (vw, vx) = (&self.values[w.0], &self.values[x.0]);
        if vw.rank() != 2 || vx.rank() != 1 || vw.cols() != vx.numel() {
            return Err(Self::shape_err("matvec", &[vw.shape(), vx.shape()]));
        }
        let mut out = vec![T::ZERO; vw.rows()];
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0f64;
            for k in 0..vw.cols() {
                acc += vw.at2(i, k).to_f64() * vx.data()[k].to_f64();
            }
            *o = T::from_f64(acc);
        }
        self.push(Op::MatVec(w, x), Array::vector(out), "matvec")
    }

    pub fn transpose(&mut self, x: NodeId) -> Result<NodeId> {
        let v = &self.values[x.0];
        if v.rank() != 2 {
            return Err(Self::shape_err("transpose", &[v.shape()]));
        }
        let value = transpose_array(v);
        self.push(Op::Transpose(x), value, "transpose")
    }

    pub fn concat0(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Self::shape_err("concat", &[]));
        }
        let first = &self.values[parts[0].0];
        let rank = first.rank();
        if rank == 0 {
            return Err(Self::shape_err("concat", &[first.shape()]));
        }
        let trailing = first.shape()[1..].to_vec();
        let mut rows = 0usize;
        for p in parts {
            let v = &self.values[p.0];
            if v.rank() != rank || v.shape()[1..] != trailing[..] {
                return Err(Self::shape_err("concat", &[first.shape(), v.shape()]));
            }
            rows += v.shape()[0];
        }
        let mut shape = vec![rows];
        shape.extend_from_slice(&trailing);
        let mut data = Vec::with_capacity(shape.iter().product());
        for p in parts {
            data.extend_from_slice(self.values[p.0].data());
        }
        let value = Array::from_vec(&shape, data)?;
        self.push(Op::Concat0(parts.to_vec()), value, "concat")
    }

    pub fn stack_rows(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Self::shape_err("stack_rows", &[]));
        }
        let len = self.values[parts[0].0].numel();
        for p in parts {
            let v = &self.values[p.0];
            if v.rank() != 1 || v.numel() != len {
                return Err(Self::shape_err("stack_rows", &[v.shape()]));
            }
        }
        let mut data = Vec::with_capacity(parts.len() * len);
        for p in parts {
            data.extend_from_slice(self.values[p.0].data());
        }
        let value = Array::matrix(parts.len(), len, data)?;
        self.push(Op::StackRows(parts.to_vec()), value, "stack_rows")
    }

    pub fn stack_scalars(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let mut data = Vec::with_capacity(parts.len());
        for p in parts {
            let v = &self.values[p.0];
            if !v.is_scalar() {
                return Err(Self::shape_err("stack_scalars", &[v.shape()]));
            }
            data.push(v.scalar_value());
        }
        self.push(Op::StackScalars(parts.to_vec()), Array::vector(data), "stack_scalars")
    }

    pub fn slice_rows(&mut self, x: NodeId, start: usize, end: usize) -> Result<NodeId> {
        let v = &self.values[x.0];
        if v.rank() != 2 || start >= end || end > v.rows() {
            return Err(Error::Shape {
                op: "slice_rows",
                details: format!("rows {start}..{end} of {:?}", v.shape()),
            });
        }
        let c = v.cols();
        let data = v.data()[start * c..end * c].to_vec();
        let value = Array::matrix(end - start, c, data)?;
        self.push(Op::SliceRows { x, start }, value, "slice_rows")
    }

    pub fn gather_rows(&mut self, x: NodeId, ids: &[usize]) -> Result<NodeId> {
        let v = &self.values[x.0];
        if v.rank() != 2 {
            return Err(Self::shape_err("gather_rows", &[v.shape()]));
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= v.rows()) {
            return Err(Error::Shape {
                op: "gather_rows",
                details: format!("row {bad} of {:?}", v.shape()),
            });
        }
        let c = v.cols();
        let mut data = Vec::with_capacity(ids.len() * c);
        for &i in ids {
            data.extend_from_slice(v.row(i));
        }
        let value = Array::matrix(ids.len(), c, data)?;
        self.push(Op::GatherRows { x, ids: ids.to_vec() }, value, "gather_rows")
    }

    pub fn reshape(&mut self, x: NodeId, shape: &[usize]) -> Result<NodeId> {
        let v = &self.values[x.0];
        let expect: usize = shape.iter().product();
        if expect != v.numel() {
            return Err(Error::Shape {
                op: "reshape",
                details: format!("{:?} -> {shape:?}", v.shape()),
            });
        }
        let value = Array::from_vec(shape, v.data().to_vec())?;
        self.push(Op::Reshape(x), value, "reshape")
    }

    pub fn tanh(&mut self, x: NodeId) -> Result<NodeId> {
        let value = self.values[x.0].map(Scalar::tanh);
        self.push(Op::Tanh(x), value, "tanh")
    }

    pub fn sigmoid(&mut self, x: NodeId) -> Result<NodeId> {
        let value = self.values[x.0].map(sigmoid_scalar);
        self.push(Op::Sigmoid(x), value, "sigmoid")
    }

    pub fn softmax(&mut self, x: NodeId, axis: usize) -> Result<NodeId> {
        let v = &self.values[x.0];
        let value = match (v.rank(), axis) {
            (1, 0) => {
                let mut out = Array::vector(v.data().to_vec());
                softmax_slice(out.data_mut());
                out
            }
            (2, 1) => {
                let mut out = v.clone();
                for i in 0..v.rows() {
                    softmax_slice(out.row_mut(i));
                }
                out
            }
            (2, 0) => {
                let mut out = v.clone();
                let (r, c) = (v.rows(), v.cols());
                for j in 0..c {
                    let mut col: Vec<T> = (0..r).map(|i| v.at2(i, j)).collect();
                    softmax_slice(&mut col);
                    for i in 0..r {
                        out.set2(i, j, col[i]);
                    }
                }
                out
            }
            _ => return Err(Self::shape_err("softmax", &[v.shape()])),
        };
        self.push(Op::Softmax { x, axis }, value, "softmax")
    }

    /// Max over one axis of a matrix; ties resolve to the first index so the
    /// backward routing is deterministic.
    pub fn max_axis(&mut self, x: NodeId, axis: usize) -> Result<NodeId> {
        let v = &self.values[x.0];
        if v.rank() != 2 || axis > 1 {
            return Err(Self::shape_err("max_axis", &[v.shape()]));
        }
        let (r, c) = (v.rows(), v.cols());
        let (out_len, lanes) = if axis == 0 { (c, r) } else { (r, c) };
        let mut out = vec![T::ZERO; out_len];
        let mut argmax = vec![0usize; out_len];
        for o in 0..out_len {
            let mut best = T::from_f64(f64::NEG_INFINITY);
            let mut best_i = 0usize;
            for lane in 0..lanes {
                let val = if axis == 0 { v.at2(lane, o) } else { v.at2(o, lane) };
                if val > best {
                    best = val;
                    best_i = lane;
                }
            }
            out[o] = best;
            argmax[o] = best_i;
        }
        self.push(Op::MaxAxis { x, axis, argmax }, Array::vector(out), "max_axis")
    }

    pub fn mean_axis(&mut self, x: NodeId, axis: usize) -> Result<NodeId> {
        let v = &self.values[x.0];
        if v.rank() != 2 || axis > 1 {
            return Err(Self::shape_err("mean_axis", &[v.shape()]));
        }
        let (r, c) = (v.rows(), v.cols());
        let (out_len, lanes) = if axis == 0 { (c, r) } else { (r, c) };
        let mut out = vec![T::ZERO; out_len];
        for o in 0..out_len {
            let mut acc = 0.0f64;
            for lane in 0..lanes {
                acc += if axis == 0 { v.at2(lane, o) } else { v.at2(o, lane) }.to_f64();
            }
            out[o] = T::from_f64(acc / lanes as f64);
        }
        self.push(Op::MeanAxis { x, axis }, Array::vector(out), "mean_axis")
    }

    pub fn mean(&mut self, x: NodeId) -> Result<NodeId> {
        let v = &self.values[x.0];
        let n = v.numel().max(1) as f64;
        let acc: f64 = v.data().iter().map(|t| t.to_f64()).sum();
        self.push(Op::Mean(x), Array::scalar(T::from_f64(acc / n)), "mean")
    }

    pub fn sum(&mut self, x: NodeId) -> Result<NodeId> {
        let acc: f64 = self.values[x.0].data().iter().map(|t| t.to_f64()).sum();
        self.push(Op::Sum(x), Array::scalar(T::from_f64(acc)), "sum")
    }

    pub fn l2_norm(&mut self, x: NodeId) -> Result<NodeId> {
        let acc: f64 = self.values[x.0]
            .data()
            .iter()
            .map(|t| {
                let v = t.to_f64();
                v * v
            })
            .sum();
        self.push(Op::L2Norm(x), Array::scalar(T::from_f64(acc.sqrt())), "l2_norm")
    }

    pub fn dot(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (&self.values[a.0], &self.values[b.0]);
        if va.rank() != 1 || vb.rank() != 1 || va.numel() != vb.numel() {
            return Err(Self::shape_err("dot", &[va.shape(), vb.shape()]));
        }
        let acc: f64 = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(&x, &y)| x.to_f64() * y.to_f64())
            .sum();
        self.push(Op::Dot(a, b), Array::scalar(T::from_f64(acc)), "dot")
    }

    /// Cosine similarity of two vectors, as a composition of dot, norm, and
    /// division; errors when either vector has zero norm.
    pub fn cosine(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let na = self.l2_norm(a)?;
        let nb = self.l2_norm(b)?;
        if self.value(na).scalar_value().to_f64() == 0.0
            || self.value(nb).scalar_value().to_f64() == 0.0
        {
            return Err(Error::NonFinite { op: "cosine (zero-norm input)" });
        }
        let d = self.dot(a, b)?;
        let denom = self.mul(na, nb)?;
        self.div(d, denom)
    }

    /// Valid 2-D convolution with full-width filters: input (R, d), weight
    /// (F, fh, d), bias (F) -> output (R - fh + 1, F).
    pub fn conv2d_valid(&mut self, input: NodeId, weight: NodeId, bias: NodeId) -> Result<NodeId> {
        let (vi, vw, vb) = (&self.values[input.0], &self.values[weight.0], &self.values[bias.0]);
        if vi.rank() != 2 || vw.rank() != 3 || vb.rank() != 1 {
            return Err(Self::shape_err("conv2d", &[vi.shape(), vw.shape(), vb.shape()]));
        }
        let (rows, d) = (vi.rows(), vi.cols());
        let (f, fh, fd) = (vw.shape()[0], vw.shape()[1], vw.shape()[2]);
        if fd != d || fh > rows || vb.numel() != f {
            return Err(Self::shape_err("conv2d", &[vi.shape(), vw.shape(), vb.shape()]));
        }
        let out_rows = rows - fh + 1;
        let mut data = vec![T::ZERO; out_rows * f];
        for i in 0..out_rows {
            for fi in 0..f {
                let mut acc = vb.data()[fi].to_f64();
                for u in 0..fh {
                    let in_row = vi.row(i + u);
                    let w_off = (fi * fh + u) * d;
                    let w_row = &vw.data()[w_off..w_off + d];
                    for v in 0..d {
                        acc += in_row[v].to_f64() * w_row[v].to_f64();
                    }
                }
                data[i * f + fi] = T::from_f64(acc);
            }
        }
        let value = Array::matrix(out_rows, f, data)?;
        self.push(Op::Conv2dValid { input, weight, bias }, value, "conv2d")
    }

    /// Numerically stable binary cross-entropy of sigmoid(logit) against a
    /// constant 0/1 target.
    pub fn bce_with_logits(&mut self, logit: NodeId, target: f64) -> Result<NodeId> {
        let v = &self.values[logit.0];
        if !v.is_scalar() {
            return Err(Self::shape_err("bce_with_logits", &[v.shape()]));
        }
        let z = v.scalar_value().to_f64();
        let loss = z.max(0.0) - z * target + (-z.abs()).exp().ln_1p();
        self.push(
            Op::BceWithLogits { logit, target },
            Array::scalar(T::from_f64(loss)),
            "bce_with_logits",
        )
    }

    /// max(0, margin - pos + neg) with the subgradient 0 at the kink.
    pub fn hinge(&mut self, pos: NodeId, neg: NodeId, margin: f64) -> Result<NodeId> {
        let (vp, vn) = (&self.values[pos.0], &self.values[neg.0]);
        if !vp.is_scalar() || !vn.is_scalar() {
            return Err(Self::shape_err("hinge", &[vp.shape(), vn.shape()]));
        }
        let violation = margin - vp.scalar_value().to_f64() + vn.scalar_value().to_f64();
        self.push(
            Op::HingeGate { pos, neg, margin },
            Array::scalar(T::from_f64(violation.max(0.0))),
            "hinge",
        )
    }

    /// Forward doubles, backward claims a factor of three; exists so tests
    /// can prove the finite-difference check catches a bad rule.
    #[cfg(test)]
    pub fn broken_scale(&mut self, x: NodeId) -> Result<NodeId> {
        let value = self.values[x.0].map(|v| T::from_f64(2.0 * v.to_f64()));
        self.push(Op::BrokenScale(x), value, "broken_scale")
    }

    fn add_grad(&mut self, id: NodeId, delta: &Array<T>) {
        let slot = &mut self.grads[id.0];
        match slot {
            Some(g) => {
                for (d, s) in g.data_mut().iter_mut().zip(delta.data()) {
                    *d = T::from_f64(d.to_f64() + s.to_f64());
                }
            }
            None => *slot = Some(delta.clone()),
        }
    }

    /// Accumulate gradients of `loss` into every node of the tape.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        if !self.values[loss.0].is_scalar() {
            return Err(Error::Shape {
                op: "backward",
                details: format!("loss must be scalar, got {:?}", self.values[loss.0].shape()),
            });
        }
        for g in &mut self.grads {
            *g = None;
        }
        self.grads[loss.0] = Some(Array::from_vec(self.values[loss.0].shape(), vec![T::ONE])?);

        for i in (0..=loss.0).rev() {
            let Some(g) = self.grads[i].clone() else { continue };
            let op = self.ops[i].clone();
            match op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    self.add_grad(a, &g);
                    self.add_grad(b, &g);
                }
                Op::Sub(a, b) => {
                    self.add_grad(a, &g);
                    let neg = g.map(|v| T::from_f64(-v.to_f64()));
                    self.add_grad(b, &neg);
                }
                Op::Mul(a, b) => {
                    let da = elementwise(&g, &self.values[b.0], |g, b| g * b);
                    let db = elementwise(&g, &self.values[a.0], |g, a| g * a);
                    self.add_grad(a, &da);
                    self.add_grad(b, &db);
                }
                Op::Div(a, b) => {
                    let da = elementwise(&g, &self.values[b.0], |g, b| g / b);
                    let vy = elementwise(&self.values[a.0], &self.values[b.0], |a, b| -a / (b * b));
                    let db = elementwise(&g, &vy, |g, v| g * v);
                    self.add_grad(a, &da);
                    self.add_grad(b, &db);
                }
                Op::Affine { x, a } => {
                    let dx = g.map(|v| T::from_f64(a * v.to_f64()));
                    self.add_grad(x, &dx);
                }
                Op::MatMul(a, b) => {
                    let bt = transpose_array(&self.values[b.0]);
                    let at = transpose_array(&self.values[a.0]);
                    let da = matmul_arrays(&g, &bt);
                    let db = matmul_arrays(&at, &g);
                    self.add_grad(a, &da);
                    self.add_grad(b, &db);
                }
                Op::MatVec(w, x) => {
                    let vw = &self.values[w.0];
                    let vx = &self.values[x.0];
                    let (m, n) = (vw.rows(), vw.cols());
                    let mut dw = vec![T::ZERO; m * n];
                    for i in 0..m {
                        let gi = g.data()[i].to_f64();
                        for k in 0..n {
                            dw[i * n + k] = T::from_f64(gi * vx.data()[k].to_f64());
                        }
                    }
                    let mut dx = vec![T::ZERO; n];
                    for (k, d) in dx.iter_mut().enumerate() {
                        let mut acc = 0.0f64;
                        for i in 0..m {
                            acc += vw.at2(i, k).to_f64() * g.data()[i].to_f64();
                        }
                        *d = T::from_f64(acc);
                    }
                    self.add_grad(w, &Array::matrix(m, n, dw)?);
                    self.add_grad(x, &Array::vector(dx));
                }
                Op::Transpose(x) => {
                    let dx = transpose_array(&g);
                    self.add_grad(x, &dx);
                }
                Op::Concat0(parts) => {
                    let mut offset = 0usize;
                    for p in parts {
                        let shape = self.values[p.0].shape().to_vec();
                        let len: usize = shape.iter().product();
                        let data = g.data()[offset..offset + len].to_vec();
                        offset += len;
                        self.add_grad(p, &Array::from_vec(&shape, data)?);
                    }
                }
                Op::StackRows(parts) => {
                    for (row, p) in parts.into_iter().enumerate() {
                        self.add_grad(p, &Array::vector(g.row(row).to_vec()));
                    }
                }
                Op::StackScalars(parts) => {
                    for (i, p) in parts.into_iter().enumerate() {
                        let shape = self.values[p.0].shape().to_vec();
                        self.add_grad(p, &Array::from_vec(&shape, vec![g.data()[i]])?);
                    }
                }
                Op::SliceRows { x, start } => {
                    let mut dx = Array::zeros(self.values[x.0].shape());
                    for r in 0..g.rows() {
                        dx.row_mut(start + r).copy_from_slice(g.row(r));
                    }
                    self.add_grad(x, &dx);
                }
                Op::GatherRows { x, ids } => {
                    let mut dx = Array::zeros(self.values[x.0].shape());
                    for (r, &id) in ids.iter().enumerate() {
                        let src = g.row(r).to_vec();
                        let dst: &mut [T] = dx.row_mut(id);
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d = T::from_f64(d.to_f64() + s.to_f64());
                        }
                    }
                    self.add_grad(x, &dx);
                }
                Op::Reshape(x) => {
                    let shape = self.values[x.0].shape().to_vec();
                    self.add_grad(x, &Array::from_vec(&shape, g.data().to_vec())?);
                }
                Op::Tanh(x) => {
                    let y = &self.values[i];
                    let dx = elementwise(&g, y, |g, y| g * (1.0 - y * y));
                    self.add_grad(x, &dx);
                }
                Op::Sigmoid(x) => {
                    let y = &self.values[i];
                    let dx = elementwise(&g, y, |g, y| g * y * (1.0 - y));
                    self.add_grad(x, &dx);
                }
                Op::Softmax { x, axis } => {
                    let y = &self.values[i];
                    let dx = softmax_backward(y, &g, axis)?;
                    self.add_grad(x, &dx);
                }
                Op::MaxAxis { x, axis, argmax } => {
                    let mut dx: Array<T> = Array::zeros(self.values[x.0].shape());
                    for (o, &lane) in argmax.iter().enumerate() {
                        let (r, c) = if axis == 0 { (lane, o) } else { (o, lane) };
                        let cur = dx.at2(r, c).to_f64();
                        dx.set2(r, c, T::from_f64(cur + g.data()[o].to_f64()));
                    }
                    self.add_grad(x, &dx);
                }
                Op::MeanAxis { x, axis } => {
                    let shape = self.values[x.0].shape().to_vec();
                    let (r, c) = (shape[0], shape[1]);
                    let lanes = if axis == 0 { r } else { c } as f64;
                    let mut dx = Array::zeros(&shape);
                    for ri in 0..r {
                        for ci in 0..c {
                            let o = if axis == 0 { ci } else { ri };
                            dx.set2(ri, ci, T::from_f64(g.data()[o].to_f64() / lanes));
                        }
                    }
                    self.add_grad(x, &dx);
                }
                Op::Mean(x) => {
                    let n = self.values[x.0].numel().max(1) as f64;
                    let gv = g.scalar_value().to_f64() / n;
                    let dx = self.values[x.0].map(|_| T::from_f64(gv));
                    self.add_grad(x, &dx);
                }
                Op::Sum(x) => {
                    let gv = g.scalar_value().to_f64();
                    let dx = self.values[x.0].map(|_| T::from_f64(gv));
                    self.add_grad(x, &dx);
                }
                Op::L2Norm(x) => {
                    let norm = self.values[i].scalar_value().to_f64();
                    let gv = g.scalar_value().to_f64();
                    let dx = if norm == 0.0 {
                        Array::zeros(self.values[x.0].shape())
                    } else {
                        self.values[x.0].map(|v| T::from_f64(gv * v.to_f64() / norm))
                    };
                    self.add_grad(x, &dx);
                }
                Op::Dot(a, b) => {
                    let gv = g.scalar_value().to_f64();
                    let da = self.values[b.0].map(|v| T::from_f64(gv * v.to_f64()));
                    let db = self.values[a.0].map(|v| T::from_f64(gv * v.to_f64()));
                    self.add_grad(a, &da);
                    self.add_grad(b, &db);
                }
                Op::Conv2dValid { input, weight, bias } => {
                    let vi = self.values[input.0].clone();
                    let vw = self.values[weight.0].clone();
                    let (rows, d) = (vi.rows(), vi.cols());
                    let (f, fh) = (vw.shape()[0], vw.shape()[1]);
                    let out_rows = rows - fh + 1;
                    let mut di = vec![0.0f64; rows * d];
                    let mut dw = vec![0.0f64; f * fh * d];
                    let mut db = vec![0.0f64; f];
                    for i2 in 0..out_rows {
                        for fi in 0..f {
                            let gv = g.at2(i2, fi).to_f64();
                            db[fi] += gv;
                            for u in 0..fh {
                                let w_off = (fi * fh + u) * d;
                                let in_off = (i2 + u) * d;
                                for v in 0..d {
                                    di[in_off + v] += gv * vw.data()[w_off + v].to_f64();
                                    dw[w_off + v] += gv * vi.data()[in_off + v].to_f64();
                                }
                            }
                        }
                    }
                    let di = Array::from_vec(&[rows, d], di.into_iter().map(T::from_f64).collect())?;
                    let dw = Array::from_vec(&[f, fh, d], dw.into_iter().map(T::from_f64).collect())?;
                    let db = Array::vector(db.into_iter().map(T::from_f64).collect());
                    self.add_grad(input, &di);
                    self.add_grad(weight, &dw);
                    self.add_grad(bias, &db);
                }
                Op::BceWithLogits { logit, target } => {
                    let z = self.values[logit.0].scalar_value().to_f64();
                    let gv = g.scalar_value().to_f64();
                    let sig = 1.0 / (1.0 + (-z).exp());
                    let dz = Array::from_vec(
                        self.values[logit.0].shape(),
                        vec![T::from_f64(gv * (sig - target))],
                    )?;
                    self.add_grad(logit, &dz);
                }
                Op::HingeGate { pos, neg, margin } => {
                    let vp = self.values[pos.0].scalar_value().to_f64();
                    let vn = self.values[neg.0].scalar_value().to_f64();
                    if margin - vp + vn > 0.0 {
                        let gv = g.scalar_value().to_f64();
                        let dp = Array::from_vec(self.values[pos.0].shape(), vec![T::from_f64(-gv)])?;
                        let dn = Array::from_vec(self.values[neg.0].shape(), vec![T::from_f64(gv)])?;
                        self.add_grad(pos, &dp);
                        self.add_grad(neg, &dn);
                    }
                }
                #[cfg(test)]
                Op::BrokenScale(x) => {
                    let dx = g.map(|v| T::from_f64(3.0 * v.to_f64()));
                    self.add_grad(x, &dx);
                }
            }
        }
        Ok(())
    }
}

fn sigmoid_scalar<T: Scalar>(v: T) -> T {
    let x = v.to_f64();
    T::from_f64(1.0 / (1.0 + (-x).exp()))
}

fn softmax_slice<T: Scalar>(xs: &mut [T]) {
    let max = xs.iter().fold(f64::NEG_INFINITY, |m, v| m.max(v.to_f64()));
    let mut sum = 0.0f64;
    let exps: Vec<f64> = xs
        .iter()
        .map(|v| {
            let e = (v.to_f64() - max).exp();
            sum += e;
            e
        })
        .collect();
    for (x, e) in xs.iter_mut().zip(exps) {
        *x = T::from_f64(e / sum);
    }
}

fn softmax_backward<T: Scalar>(y: &Array<T>, g: &Array<T>, axis: usize) -> Result<Array<T>> {
    let mut dx = Array::zeros(y.shape());
    let apply = |y_slice: &[f64], g_slice: &[f64], out: &mut [f64]| {
        let inner: f64 = y_slice.iter().zip(g_slice).map(|(y, g)| y * g).sum();
        for ((o, &yv), &gv) in out.iter_mut().zip(y_slice).zip(g_slice) {
            *o = yv * (gv - inner);
        }
    };
    match (y.rank(), axis) {
        (1, 0) => {
            let ys: Vec<f64> = y.data().iter().map(|v| v.to_f64()).collect();
            let gs: Vec<f64> = g.data().iter().map(|v| v.to_f64()).collect();
            let mut out = vec![0.0; ys.len()];
            apply(&ys, &gs, &mut out);
            for (d, o) in dx.data_mut().iter_mut().zip(out) {
                *d = T::from_f64(o);
            }
        }
        (2, 1) => {
            for i in 0..y.rows() {
                let ys: Vec<f64> = y.row(i).iter().map(|v| v.to_f64()).collect();
                let gs: Vec<f64> = g.row(i).iter().map(|v| v.to_f64()).collect();
                let mut out = vec![0.0; ys.len()];
                apply(&ys, &gs, &mut out);
                for (j, o) in out.into_iter().enumerate() {
                    dx.set2(i, j, T::from_f64(o));
                }
            }
        }
        (2, 0) => {
            for j in 0..y.cols() {
                let ys: Vec<f64> = (0..y.rows()).map(|i| y.at2(i, j).to_f64()).collect();
                let gs: Vec<f64> = (0..y.rows()).map(|i| g.at2(i, j).to_f64()).collect();
                let mut out = vec![0.0; ys.len()];
                apply(&ys, &gs, &mut out);
                for (i, o) in out.into_iter().enumerate() {
                    dx.set2(i, j, T::from_f64(o));
                }
            }
        }
        _ => {
            return Err(Error::Shape {
                op: "softmax backward",
                details: format!("{:?} axis {axis}", y.shape()),
            })
        }
    }
    Ok(dx)
}

fn elementwise<T: Scalar>(a: &Array<T>, b: &Array<T>, f: impl Fn(f64, f64) -> f64) -> Array<T> {
    debug_assert_eq!(a.shape(), b.shape());
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| T::from_f64(f(x.to_f64(), y.to_f64())))
        .collect();
    Array::from_vec(a.shape(), data).expect("same shapes")
}

fn matmul_arrays<T: Scalar>(a: &Array<T>, b: &Array<T>) -> Array<T> {
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    let mut data = vec![T::ZERO; m * n];
    for i in 0..m {
        for j in 0..n {
            let mut acc = 0.0f64;
            for kk in 0..k {
                acc += a.at2(i, kk).to_f64() * b.at2(kk, j).to_f64();
            }
            data[i * n + j] = T::from_f64(acc);
        }
    }
    Array::matrix(m, n, data).expect("matmul shape")
}

fn transpose_array<T: Scalar>(a: &Array<T>) -> Array<T> {
    let (r, c) = (a.rows(), a.cols());
    let mut data = vec![T::ZERO; r * c];
    for i in 0..r {
        for j in 0..c {
            data[j * r + i] = a.at2(i, j);
        }
    }
    Array::matrix(c, r, data).expect("transpose shape")
}
