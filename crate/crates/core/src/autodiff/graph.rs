//! Reverse-mode automatic differentiation over dense tensors.
//!
//! A [`Graph`] is a define-by-run tape: every operation appends a node,
//! computes its forward value eagerly, and records its inputs. Node ids grow
//! monotonically, so reverse insertion order is a reverse topological order
//! and the backward pass visits each node exactly once.
//!
//! Shapes are validated at op construction and mismatches panic with the op
//! name; public entry points that accept caller data validate first and
//! return `Result`.

use super::tensor::Tensor;

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(pub(crate) usize);

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    Neg(NodeId),
    MatMul(NodeId, NodeId),
    Relu(NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Exp(NodeId),
    Ln(NodeId),
    Softplus(NodeId),
    Sqrt(NodeId),
    SoftmaxRows(NodeId),
    SumAll(NodeId),
    MeanAll(NodeId),
    SumAxis1(NodeId),
    MeanAxis0(NodeId),
    SliceRows(NodeId, usize, usize),
    SliceCols(NodeId, usize, usize),
    ConcatRows(Vec<NodeId>),
    Transpose(NodeId),
    Reshape(NodeId),
    /// y = mul * x + add, with constants captured at construction. The add
    /// term is kept for Debug output; backward only needs the factor.
    AffineScalar(NodeId, f64, #[allow(dead_code)] f64),
}

struct Node {
    op: Op,
    value: Tensor,
    needs_grad: bool,
}

/// Gradients produced by [`Graph::backward`], indexed by node id.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the loss w.r.t. the node, if the node was reached.
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }

    /// Gradient of the loss w.r.t. the node, zeros if the node was not reached.
    pub fn get_or_zeros(&self, id: NodeId, shape: &[usize]) -> Tensor {
        match self.get(id) {
            Some(t) => t.clone(),
            None => Tensor::zeros(shape.to_vec()),
        }
    }
}

/// Define-by-run computation graph.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Forward value of a node.
    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op: Op, value: Tensor, needs_grad: bool) -> NodeId {
        debug_assert!(value.is_finite(), "non-finite forward value from {op:?}");
        self.nodes.push(Node {
            op,
            value,
            needs_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn needs(&self, id: NodeId) -> bool {
        self.nodes[id.0].needs_grad
    }

    /// A constant leaf: no gradient is propagated into it.
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf, value, false)
    }

    /// A parameter leaf: gradients are accumulated for it.
    pub fn param(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf, value, true)
    }

    pub fn scalar(&mut self, value: f64) -> NodeId {
        self.constant(Tensor::scalar(value))
    }

    // ---- elementwise binary ops (with [n,k]/[n,1]/[1,k]/[1,1] broadcasting) ----

    fn broadcast_shape(&self, a: NodeId, b: NodeId, what: &str) -> (usize, usize) {
        let (ra, ca) = (self.value(a).rows(), self.value(a).cols());
        let (rb, cb) = (self.value(b).rows(), self.value(b).cols());
        let rows = if ra == rb || rb == 1 {
            ra
        } else if ra == 1 {
            rb
        } else {
            panic!("{what}: incompatible rows {ra} vs {rb}")
        };
        let cols = if ca == cb || cb == 1 {
            ca
        } else if ca == 1 {
            cb
        } else {
            panic!("{what}: incompatible cols {ca} vs {cb}")
        };
        (rows, cols)
    }

    fn binary(&mut self, a: NodeId, b: NodeId, what: &str, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let (rows, cols) = self.broadcast_shape(a, b, what);
        let ta = self.value(a);
        let tb = self.value(b);
        let (ra, ca) = (ta.rows(), ta.cols());
        let (rb, cb) = (tb.rows(), tb.cols());
        let mut out = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                let va = ta.at(if ra == 1 { 0 } else { r }, if ca == 1 { 0 } else { c });
                let vb = tb.at(if rb == 1 { 0 } else { r }, if cb == 1 { 0 } else { c });
                out.push(f(va, vb));
            }
        }
        Tensor::matrix(rows, cols, out)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.binary(a, b, "add", |x, y| x + y);
        let ng = self.needs(a) || self.needs(b);
        self.push(Op::Add(a, b), v, ng)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.binary(a, b, "sub", |x, y| x - y);
        let ng = self.needs(a) || self.needs(b);
        self.push(Op::Sub(a, b), v, ng)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.binary(a, b, "mul", |x, y| x * y);
        let ng = self.needs(a) || self.needs(b);
        self.push(Op::Mul(a, b), v, ng)
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.binary(a, b, "div", |x, y| x / y);
        let ng = self.needs(a) || self.needs(b);
        self.push(Op::Div(a, b), v, ng)
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| -x);
        let ng = self.needs(a);
        self.push(Op::Neg(a), v, ng)
    }

    // ---- matmul ----

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let ta = self.value(a);
        let tb = self.value(b);
        let (n, m) = (ta.rows(), ta.cols());
        let (m2, k) = (tb.rows(), tb.cols());
        assert_eq!(m, m2, "matmul: inner dims {m} vs {m2}");
        let v = matmul_raw(ta, tb, n, m, k);
        let ng = self.needs(a) || self.needs(b);
        self.push(Op::MatMul(a, b), v, ng)
    }

    // ---- elementwise unary ops ----

    fn unary(&mut self, a: NodeId, op: Op, f: impl Fn(f64) -> f64) -> NodeId {
        let v = self.value(a).map(f);
        let ng = self.needs(a);
        self.push(op, v, ng)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Relu(a), |x| x.max(0.0))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Sigmoid(a), sigmoid)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Tanh(a), f64::tanh)
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Exp(a), f64::exp)
    }

    pub fn ln(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Ln(a), f64::ln)
    }

    /// ln(1 + e^x), evaluated stably; the smooth companion of `ln(sigmoid)`.
    pub fn softplus(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Softplus(a), softplus)
    }

    pub fn sqrt(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Sqrt(a), f64::sqrt)
    }

    pub fn affine_scalar(&mut self, a: NodeId, mul: f64, add: f64) -> NodeId {
        self.unary(a, Op::AffineScalar(a, mul, add), |x| mul * x + add)
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> NodeId {
        self.affine_scalar(a, factor, 0.0)
    }

    // ---- softmax / reductions ----

    /// Row-wise softmax with max-subtraction; rows sum to 1 within 1e-12.
    pub fn softmax_rows(&mut self, a: NodeId) -> NodeId {
        let t = self.value(a);
        let (n, k) = (t.rows(), t.cols());
        let mut out = vec![0.0; n * k];
        for r in 0..n {
            let row = &t.data()[r * k..(r + 1) * k];
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for c in 0..k {
                let e = (row[c] - m).exp();
                out[r * k + c] = e;
                sum += e;
            }
            for c in 0..k {
                out[r * k + c] /= sum;
            }
        }
        let ng = self.needs(a);
        self.push(Op::SoftmaxRows(a), Tensor::matrix(n, k, out), ng)
    }

    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let s: f64 = self.value(a).data().iter().sum();
        let ng = self.needs(a);
        self.push(Op::SumAll(a), Tensor::scalar(s), ng)
    }

    pub fn mean_all(&mut self, a: NodeId) -> NodeId {
        let t = self.value(a);
        let s: f64 = t.data().iter().sum::<f64>() / t.numel() as f64;
        let ng = self.needs(a);
        self.push(Op::MeanAll(a), Tensor::scalar(s), ng)
    }

    /// Sum over columns: `[n, k] -> [n, 1]`.
    pub fn sum_axis1(&mut self, a: NodeId) -> NodeId {
        let t = self.value(a);
        let (n, k) = (t.rows(), t.cols());
        let mut out = vec![0.0; n];
        for r in 0..n {
            out[r] = t.data()[r * k..(r + 1) * k].iter().sum();
        }
        let ng = self.needs(a);
        self.push(Op::SumAxis1(a), Tensor::col(out), ng)
    }

    /// Mean over rows: `[n, k] -> [1, k]`.
    pub fn mean_axis0(&mut self, a: NodeId) -> NodeId {
        let t = self.value(a);
        let (n, k) = (t.rows(), t.cols());
        let mut out = vec![0.0; k];
        for r in 0..n {
            for c in 0..k {
                out[c] += t.at(r, c);
            }
        }
        for v in &mut out {
            *v /= n as f64;
        }
        let ng = self.needs(a);
        self.push(Op::MeanAxis0(a), Tensor::row(out), ng)
    }

    // ---- structural ops ----

    pub fn slice_rows(&mut self, a: NodeId, r0: usize, r1: usize) -> NodeId {
        let t = self.value(a);
        let (n, k) = (t.rows(), t.cols());
        assert!(r0 < r1 && r1 <= n, "slice_rows: {r0}..{r1} out of {n}");
        let v = Tensor::matrix(r1 - r0, k, t.data()[r0 * k..r1 * k].to_vec());
        let ng = self.needs(a);
        self.push(Op::SliceRows(a, r0, r1), v, ng)
    }

    pub fn slice_cols(&mut self, a: NodeId, c0: usize, c1: usize) -> NodeId {
        let t = self.value(a);
        let (n, k) = (t.rows(), t.cols());
        assert!(c0 < c1 && c1 <= k, "slice_cols: {c0}..{c1} out of {k}");
        let mut out = Vec::with_capacity(n * (c1 - c0));
        for r in 0..n {
            out.extend_from_slice(&t.data()[r * k + c0..r * k + c1]);
        }
        let v = Tensor::matrix(n, c1 - c0, out);
        let ng = self.needs(a);
        self.push(Op::SliceCols(a, c0, c1), v, ng)
    }

    pub fn concat_rows(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty(), "concat_rows: empty input");
        let k = self.value(parts[0]).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let t = self.value(p);
            assert_eq!(t.cols(), k, "concat_rows: column mismatch");
            rows += t.rows();
            data.extend_from_slice(t.data());
        }
        let ng = parts.iter().any(|&p| self.needs(p));
        self.push(Op::ConcatRows(parts.to_vec()), Tensor::matrix(rows, k, data), ng)
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let t = self.value(a);
        let (n, k) = (t.rows(), t.cols());
        let mut out = vec![0.0; n * k];
        for r in 0..n {
            for c in 0..k {
                out[c * n + r] = t.at(r, c);
            }
        }
        let ng = self.needs(a);
        self.push(Op::Transpose(a), Tensor::matrix(k, n, out), ng)
    }

    pub fn reshape(&mut self, a: NodeId, shape: Vec<usize>) -> NodeId {
        let v = self.value(a).reshape(shape);
        let ng = self.needs(a);
        self.push(Op::Reshape(a), v, ng)
    }

    // ---- composites ----

    /// Scalar dot product of two same-shape tensors.
    pub fn dot(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let p = self.mul(a, b);
        self.sum_all(p)
    }

    /// Numerically stable `ln(sum(exp(x)))` over all elements, using the
    /// current maximum as a constant shift (exact: the shift cancels).
    pub fn logsumexp_all(&mut self, a: NodeId) -> NodeId {
        let m = self
            .value(a)
            .data()
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let shifted = self.affine_scalar(a, 1.0, -m);
        let e = self.exp(shifted);
        let s = self.sum_all(e);
        let l = self.ln(s);
        self.affine_scalar(l, 1.0, m)
    }

    // ---- backward ----

    /// Reverse pass from a scalar loss node. Returns per-node gradients for
    /// every node on a path from a parameter to the loss.
    pub fn backward(&self, loss: NodeId) -> Gradients {
        assert_eq!(
            self.value(loss).numel(),
            1,
            "backward requires a scalar loss, got shape {:?}",
            self.value(loss).shape()
        );
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(self.value(loss).shape().to_vec(), 1.0));

        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].needs_grad {
                continue;
            }
            let g = match grads[idx].take() {
                Some(g) => g,
                None => continue,
            };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Gradients { grads }
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], id: NodeId, delta: Tensor) {
        if !self.nodes[id.0].needs_grad {
            return;
        }
        // Reduce broadcast dims back to the input's shape.
        let target = self.value(id);
        let reduced = reduce_to_shape(delta, target.rows(), target.cols(), target.shape());
        match &mut grads[id.0] {
            Some(acc) => {
                for (a, d) in acc.data_mut().iter_mut().zip(reduced.data()) {
                    *a += d;
                }
            }
            slot => *slot = Some(reduced),
        }
    }

    fn propagate(&self, idx: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let out = &self.nodes[idx].value;
        match &self.nodes[idx].op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.accumulate(grads, *a, broadcast_like(g, out));
                self.accumulate(grads, *b, broadcast_like(g, out));
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, broadcast_like(g, out));
                self.accumulate(grads, *b, broadcast_like(g, out).map(|x| -x));
            }
            Op::Mul(a, b) => {
                let tb = broadcast_to(self.value(*b), out.rows(), out.cols());
                let ta = broadcast_to(self.value(*a), out.rows(), out.cols());
                self.accumulate(grads, *a, elementwise(g, &tb, |x, y| x * y));
                self.accumulate(grads, *b, elementwise(g, &ta, |x, y| x * y));
            }
            Op::Div(a, b) => {
                let tb = broadcast_to(self.value(*b), out.rows(), out.cols());
                let ta = broadcast_to(self.value(*a), out.rows(), out.cols());
                self.accumulate(grads, *a, elementwise(g, &tb, |x, y| x / y));
                let mut db = elementwise(g, &ta, |x, y| x * y);
                for (d, bv) in db.data_mut().iter_mut().zip(tb.data()) {
                    *d = -*d / (bv * bv);
                }
                self.accumulate(grads, *b, db);
            }
            Op::Neg(a) => self.accumulate(grads, *a, g.map(|x| -x)),
            Op::MatMul(a, b) => {
                let ta = self.value(*a);
                let tb = self.value(*b);
                let (n, m) = (ta.rows(), ta.cols());
                let k = tb.cols();
                // dA = g . B^T
                let mut da = vec![0.0; n * m];
                for i in 0..n {
                    for j in 0..m {
                        let mut s = 0.0;
                        for c in 0..k {
                            s += g.at(i, c) * tb.at(j, c);
                        }
                        da[i * m + j] = s;
                    }
                }
                self.accumulate(grads, *a, Tensor::matrix(n, m, da));
                // dB = A^T . g
                let mut db = vec![0.0; m * k];
                for i in 0..m {
                    for c in 0..k {
                        let mut s = 0.0;
                        for r in 0..n {
                            s += ta.at(r, i) * g.at(r, c);
                        }
                        db[i * k + c] = s;
                    }
                }
                self.accumulate(grads, *b, Tensor::matrix(m, k, db));
            }
            Op::Relu(a) => {
                let input = self.value(*a);
                let mut d = g.clone();
                for (dv, &x) in d.data_mut().iter_mut().zip(input.data()) {
                    if x <= 0.0 {
                        *dv = 0.0;
                    }
                }
                self.accumulate(grads, *a, d);
            }
            Op::Sigmoid(a) => {
                let mut d = g.clone();
                for (dv, &y) in d.data_mut().iter_mut().zip(out.data()) {
                    *dv *= y * (1.0 - y);
                }
                self.accumulate(grads, *a, d);
            }
            Op::Tanh(a) => {
                let mut d = g.clone();
                for (dv, &y) in d.data_mut().iter_mut().zip(out.data()) {
                    *dv *= 1.0 - y * y;
                }
                self.accumulate(grads, *a, d);
            }
            Op::Exp(a) => {
                let mut d = g.clone();
                for (dv, &y) in d.data_mut().iter_mut().zip(out.data()) {
                    *dv *= y;
                }
                self.accumulate(grads, *a, d);
            }
            Op::Ln(a) => {
                let input = self.value(*a);
                let mut d = g.clone();
                for (dv, &x) in d.data_mut().iter_mut().zip(input.data()) {
                    *dv /= x;
                }
                self.accumulate(grads, *a, d);
            }
            Op::Softplus(a) => {
                let input = self.value(*a);
                let mut d = g.clone();
                for (dv, &x) in d.data_mut().iter_mut().zip(input.data()) {
                    *dv *= sigmoid(x);
                }
                self.accumulate(grads, *a, d);
            }
            Op::Sqrt(a) => {
                let mut d = g.clone();
                for (dv, &y) in d.data_mut().iter_mut().zip(out.data()) {
                    *dv *= 0.5 / y;
                }
                self.accumulate(grads, *a, d);
            }
            Op::SoftmaxRows(a) => {
                let (n, k) = (out.rows(), out.cols());
                let mut d = vec![0.0; n * k];
                for r in 0..n {
                    let mut dot = 0.0;
                    for c in 0..k {
                        dot += g.at(r, c) * out.at(r, c);
                    }
                    for c in 0..k {
                        d[r * k + c] = out.at(r, c) * (g.at(r, c) - dot);
                    }
                }
                self.accumulate(grads, *a, Tensor::matrix(n, k, d));
            }
            Op::SumAll(a) => {
                let t = self.value(*a);
                self.accumulate(grads, *a, Tensor::full(t.shape().to_vec(), g.item()));
            }
            Op::MeanAll(a) => {
                let t = self.value(*a);
                let scale = g.item() / t.numel() as f64;
                self.accumulate(grads, *a, Tensor::full(t.shape().to_vec(), scale));
            }
            Op::SumAxis1(a) => {
                let t = self.value(*a);
                let (n, k) = (t.rows(), t.cols());
                let mut d = vec![0.0; n * k];
                for r in 0..n {
                    let gv = g.at(r, 0);
                    for c in 0..k {
                        d[r * k + c] = gv;
                    }
                }
                self.accumulate(grads, *a, Tensor::matrix(n, k, d));
            }
            Op::MeanAxis0(a) => {
                let t = self.value(*a);
                let (n, k) = (t.rows(), t.cols());
                let mut d = vec![0.0; n * k];
                for r in 0..n {
                    for c in 0..k {
                        d[r * k + c] = g.at(0, c) / n as f64;
                    }
                }
                self.accumulate(grads, *a, Tensor::matrix(n, k, d));
            }
            Op::SliceRows(a, r0, _r1) => {
                let t = self.value(*a);
                let (n, k) = (t.rows(), t.cols());
                let mut d = vec![0.0; n * k];
                for r in 0..g.rows() {
                    for c in 0..k {
                        d[(r0 + r) * k + c] = g.at(r, c);
                    }
                }
                self.accumulate(grads, *a, Tensor::matrix(n, k, d));
            }
            Op::SliceCols(a, c0, _c1) => {
                let t = self.value(*a);
                let (n, k) = (t.rows(), t.cols());
                let mut d = vec![0.0; n * k];
                for r in 0..n {
                    for c in 0..g.cols() {
                        d[r * k + c0 + c] = g.at(r, c);
                    }
                }
                self.accumulate(grads, *a, Tensor::matrix(n, k, d));
            }
            Op::ConcatRows(parts) => {
                let k = out.cols();
                let mut offset = 0;
                for &p in parts {
                    let rows = self.value(p).rows();
                    let d = Tensor::matrix(
                        rows,
                        k,
                        g.data()[offset * k..(offset + rows) * k].to_vec(),
                    );
                    self.accumulate(grads, p, d);
                    offset += rows;
                }
            }
            Op::Transpose(a) => {
                let (n, k) = (g.rows(), g.cols());
                let mut d = vec![0.0; n * k];
                for r in 0..n {
                    for c in 0..k {
                        d[c * n + r] = g.at(r, c);
                    }
                }
                self.accumulate(grads, *a, Tensor::matrix(k, n, d));
            }
            Op::Reshape(a) => {
                let shape = self.value(*a).shape().to_vec();
                self.accumulate(grads, *a, g.reshape(shape));
            }
            Op::AffineScalar(a, mul, _) => {
                self.accumulate(grads, *a, g.map(|x| mul * x));
            }
        }
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

pub(crate) fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

fn matmul_raw(a: &Tensor, b: &Tensor, n: usize, m: usize, k: usize) -> Tensor {
    let mut out = vec![0.0; n * k];
    let ad = a.data();
    let bd = b.data();
    for i in 0..n {
        for j in 0..m {
            let av = ad[i * m + j];
            if av == 0.0 {
                continue;
            }
            let brow = &bd[j * k..(j + 1) * k];
            let orow = &mut out[i * k..(i + 1) * k];
            for c in 0..k {
                orow[c] += av * brow[c];
            }
        }
    }
    Tensor::matrix(n, k, out)
}

fn elementwise(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    debug_assert_eq!(a.numel(), b.numel());
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| f(x, y))
        .collect();
    Tensor::from_vec(a.shape().to_vec(), data)
}

fn broadcast_to(t: &Tensor, rows: usize, cols: usize) -> Tensor {
    if t.rows() == rows && t.cols() == cols {
        return t.clone();
    }
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            out.push(t.at(
                if t.rows() == 1 { 0 } else { r },
                if t.cols() == 1 { 0 } else { c },
            ));
        }
    }
    Tensor::matrix(rows, cols, out)
}

fn broadcast_like(g: &Tensor, out: &Tensor) -> Tensor {
    broadcast_to(g, out.rows(), out.cols())
}

/// Sum a gradient over dims that were broadcast, recovering `shape`.
fn reduce_to_shape(g: Tensor, rows: usize, cols: usize, shape: &[usize]) -> Tensor {
    if g.rows() == rows && g.cols() == cols {
        return if g.shape() == shape {
            g
        } else {
            g.reshape(shape.to_vec())
        };
    }
    let mut out = vec![0.0; rows * cols];
    for r in 0..g.rows() {
        for c in 0..g.cols() {
            let tr = if rows == 1 { 0 } else { r };
            let tc = if cols == 1 { 0 } else { c };
            out[tr * cols + tc] += g.at(r, c);
        }
    }
    Tensor::from_vec(shape.to_vec(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn square_gradient() {
        let mut g = Graph::new();
        let x = g.param(Tensor::scalar(3.0));
        let y = g.mul(x, x);
        let grads = g.backward(y);
        assert_relative_eq!(grads.get(x).unwrap().item(), 6.0);
    }

    #[test]
    fn matmul_gradients_match_manual() {
        // f(A, B) = sum(A.B), A 2x2, B 2x2 -> dA[i][j] = sum_c B[j][c]
        let mut g = Graph::new();
        let a = g.param(Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]));
        let b = g.param(Tensor::matrix(2, 2, vec![5.0, 6.0, 7.0, 8.0]));
        let y = g.matmul(a, b);
        let s = g.sum_all(y);
        let grads = g.backward(s);
        let da = grads.get(a).unwrap();
        assert_eq!(da.data(), &[11.0, 15.0, 11.0, 15.0]);
        let db = grads.get(b).unwrap();
        assert_eq!(db.data(), &[4.0, 4.0, 6.0, 6.0]);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::matrix(2, 5, vec![0.0; 10]));
        let y = g.softmax_rows(x);
        for r in 0..2 {
            let s: f64 = (0..5).map(|c| g.value(y).at(r, c)).sum();
            assert!((s - 1.0).abs() < 1e-12);
            assert_relative_eq!(g.value(y).at(r, 0), 0.2);
        }
    }

    #[test]
    fn softmax_of_anything_has_zero_gradient_through_sum() {
        // sum(softmax(x)) is constant 1, so the gradient must vanish.
        let mut g = Graph::new();
        let x = g.param(Tensor::row(vec![0.3, -1.2, 2.0, 0.0]));
        let sm = g.softmax_rows(x);
        let s = g.sum_all(sm);
        let grads = g.backward(s);
        for &d in grads.get(x).unwrap().data() {
            assert!(d.abs() < 1e-14, "gradient {d} not ~0");
        }
    }

    #[test]
    fn broadcast_add_reduces_gradient() {
        // y = X + b with X 3x2 and b 1x2; d(sum y)/db = [3, 3]
        let mut g = Graph::new();
        let x = g.constant(Tensor::matrix(3, 2, vec![0.0; 6]));
        let b = g.param(Tensor::row(vec![1.0, 2.0]));
        let y = g.add(x, b);
        let s = g.sum_all(y);
        let grads = g.backward(s);
        assert_eq!(grads.get(b).unwrap().data(), &[3.0, 3.0]);
    }

    #[test]
    fn logsumexp_is_stable_and_exact() {
        let mut g = Graph::new();
        let x = g.param(Tensor::row(vec![1000.0, 1000.0]));
        let l = g.logsumexp_all(x);
        assert_relative_eq!(g.value(l).item(), 1000.0 + 2f64.ln(), epsilon = 1e-9);
    }

    #[test]
    fn slice_and_concat_roundtrip_gradient() {
        let mut g = Graph::new();
        let x = g.param(Tensor::matrix(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        let top = g.slice_rows(x, 0, 1);
        let rest = g.slice_rows(x, 1, 3);
        let back = g.concat_rows(&[top, rest]);
        let weights = Tensor::matrix(3, 2, vec![1.0, 10.0, 100.0, 1000.0, 2.0, 4.0]);
        let w = g.constant(weights.clone());
        let p = g.mul(back, w);
        let s = g.sum_all(p);
        let grads = g.backward(s);
        assert_eq!(grads.get(x).unwrap().data(), weights.data());
    }
}
