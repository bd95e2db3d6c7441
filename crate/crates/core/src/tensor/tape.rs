use std::cell::RefCell;
use std::rc::Rc;

use rand::Rng;

use super::{
    axis_blocks, matmul_acc, matmul_dims, softmax_in_place, transpose_data, Scalar, Tensor,
    TensorError,
};

#[derive(Debug)]
enum Op<T> {
    Leaf,
    MatMul(usize, usize),
    Transpose(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    AddBias(usize, usize),
    Scale(usize, T),
    Relu(usize),
    Tanh(usize),
    Sigmoid(usize),
    Abs(usize),
    Outer(usize, usize),
    RowOuter(usize, usize),
    Softmax(usize, usize),
    LogSoftmax(usize, usize),
    Concat(Vec<usize>, usize),
    Slice {
        input: usize,
        axis: usize,
        start: usize,
    },
    Reshape(usize),
    SumAxis(usize, usize),
    Sum(usize),
    Mean(usize),
    ScaleRows(usize, usize),
    Mask(usize, Vec<T>),
}

#[derive(Debug)]
struct Node<T> {
    value: Rc<Tensor<T>>,
    op: Op<T>,
    requires_grad: bool,
}

/// Records operations of one forward pass.
///
/// Node ids are assigned in creation order, so every parent precedes its
/// children and a reverse sweep over ids is a valid topological order.
#[derive(Debug, Default)]
pub struct Tape<T> {
    nodes: RefCell<Vec<Node<T>>>,
}

/// Handle to a value recorded on a [`Tape`].
pub struct Var<'t, T> {
    tape: &'t Tape<T>,
    id: usize,
}

impl<T> Clone for Var<'_, T> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<T> Copy for Var<'_, T> {}

impl<T> std::fmt::Debug for Var<'_, T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var({})", self.id)
    }
}

/// Gradients of a scalar loss with respect to the tracked leaves of a tape.
#[derive(Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, var: Var<'_, T>) -> Option<&Tensor<T>> {
        self.grads.get(var.id).and_then(Option::as_ref)
    }

    /// Gradient of a tracked leaf, or zeros of the leaf's shape when the loss
    /// does not depend on it.
    pub fn get_or_zeros(&self, var: Var<'_, T>) -> Tensor<T> {
        self.get(var)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(&var.shape()))
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.borrow().is_empty()
    }

    /// Records a leaf that does not receive gradients.
    pub fn constant(&self, value: Tensor<T>) -> Var<'_, T> {
        self.push_node(value, Op::Leaf, false)
    }

    /// Records a leaf whose gradient is reported by [`Tape::backward`].
    pub fn param(&self, value: Tensor<T>) -> Var<'_, T> {
        self.push_node(value, Op::Leaf, true)
    }

    fn push_node(&self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var<'_, T> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value: Rc::new(value),
            op,
            requires_grad,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn push(&self, value: Tensor<T>, op: Op<T>, parents: &[usize]) -> Var<'_, T> {
        let requires_grad = {
            let nodes = self.nodes.borrow();
            parents.iter().any(|&p| nodes[p].requires_grad)
        };
        self.push_node(value, op, requires_grad)
    }

    fn value(&self, id: usize) -> Rc<Tensor<T>> {
        Rc::clone(&self.nodes.borrow()[id].value)
    }

    /// Concatenates `parts` along `axis`; all other extents must agree.
    pub fn concat<'t>(
        &'t self,
        parts: &[Var<'t, T>],
        axis: usize,
    ) -> Result<Var<'t, T>, TensorError> {
        let first = parts.first().ok_or(TensorError::Domain {
            op: "concat",
            detail: "no parts given".into(),
        })?;
        let base = first.shape();
        if axis >= base.len() {
            return Err(TensorError::Rank {
                op: "concat",
                expected: axis + 1,
                shape: base,
            });
        }
        let values: Vec<_> = parts.iter().map(|p| p.value()).collect();
        let mut total = 0;
        for v in &values {
            let s = v.shape();
            let same_off_axis = s.len() == base.len()
                && s.iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(i, (a, b))| i == axis || a == b);
            if !same_off_axis {
                return Err(TensorError::ShapeMismatch {
                    op: "concat",
                    left: base.clone(),
                    right: s.to_vec(),
                });
            }
            total += s[axis];
        }
        let mut shape = base.clone();
        shape[axis] = total;
        let (outer, _, inner) = axis_blocks(&shape, axis);
        let mut data = Vec::with_capacity(shape.iter().product());
        for o in 0..outer {
            for v in &values {
                let chunk = v.shape()[axis] * inner;
                data.extend_from_slice(&v.data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let ids: Vec<usize> = parts.iter().map(|p| p.id).collect();
        let out = Tensor { shape, data };
        Ok(self.push(out, Op::Concat(ids.clone(), axis), &ids))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var<'_, T>) -> Result<Gradients<T>, TensorError> {
        let nodes = self.nodes.borrow();
        let root = &nodes[loss.id];
        if root.value.len() != 1 {
            return Err(TensorError::NonScalarLoss(root.value.shape().to_vec()));
        }
        if !root.requires_grad {
            return Err(TensorError::Detached);
        }
        let mut pending: Vec<Option<Vec<T>>> = (0..=loss.id).map(|_| None).collect();
        let mut leaf_grads: Vec<Option<Tensor<T>>> = (0..nodes.len()).map(|_| None).collect();
        pending[loss.id] = Some(vec![T::one()]);

        for id in (0..=loss.id).rev() {
            let Some(g) = pending[id].take() else {
                continue;
            };
            let node = &nodes[id];
            if !node.requires_grad {
                continue;
            }
            let out = &node.value;
            let mut acc = |parent: usize, grad: Vec<T>| {
                if !nodes[parent].requires_grad {
                    return;
                }
                match &mut pending[parent] {
                    Some(existing) => {
                        for (e, v) in existing.iter_mut().zip(grad) {
                            *e = *e + v;
                        }
                    }
                    slot @ None => *slot = Some(grad),
                }
            };
            let val = |pid: usize| &nodes[pid].value;
            match &node.op {
                Op::Leaf => {
                    leaf_grads[id] = Some(Tensor {
                        shape: out.shape().to_vec(),
                        data: g,
                    });
                }
                Op::MatMul(a, b) => {
                    let (av, bv) = (val(*a), val(*b));
                    let (m, k, n) = matmul_dims(av.shape(), bv.shape())?;
                    if nodes[*a].requires_grad {
                        let bt = transpose_data(bv.data(), k, n);
                        let mut da = vec![T::zero(); m * k];
                        matmul_acc(&g, &bt, &mut da, m, n, k);
                        acc(*a, da);
                    }
                    if nodes[*b].requires_grad {
                        let at = transpose_data(av.data(), m, k);
                        let mut db = vec![T::zero(); k * n];
                        matmul_acc(&at, &g, &mut db, k, m, n);
                        acc(*b, db);
                    }
                }
                Op::Transpose(a) => {
                    let s = out.shape();
                    acc(*a, transpose_data(&g, s[0], s[1]));
                }
                Op::Add(a, b) => {
                    acc(*b, g.clone());
                    acc(*a, g);
                }
                Op::Sub(a, b) => {
                    acc(*b, g.iter().map(|&v| -v).collect());
                    acc(*a, g);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (val(*a), val(*b));
                    acc(*a, g.iter().zip(bv.data()).map(|(&x, &y)| x * y).collect());
                    acc(*b, g.iter().zip(av.data()).map(|(&x, &y)| x * y).collect());
                }
                Op::AddBias(a, bias) => {
                    let n = val(*bias).len();
                    let mut db = vec![T::zero(); n];
                    for row in g.chunks(n) {
                        for (d, &v) in db.iter_mut().zip(row) {
                            *d = *d + v;
                        }
                    }
                    acc(*bias, db);
                    acc(*a, g);
                }
                Op::Scale(a, c) => acc(*a, g.iter().map(|&v| v * *c).collect()),
                Op::Relu(a) => {
                    let x = val(*a);
                    acc(
                        *a,
                        g.iter()
                            .zip(x.data())
                            .map(|(&gv, &xv)| if xv > T::zero() { gv } else { T::zero() })
                            .collect(),
                    );
                }
                Op::Tanh(a) => acc(
                    *a,
                    g.iter()
                        .zip(out.data())
                        .map(|(&gv, &y)| gv * (T::one() - y * y))
                        .collect(),
                ),
                Op::Sigmoid(a) => acc(
                    *a,
                    g.iter()
                        .zip(out.data())
                        .map(|(&gv, &y)| gv * y * (T::one() - y))
                        .collect(),
                ),
                Op::Abs(a) => {
                    let x = val(*a);
                    acc(
                        *a,
                        g.iter()
                            .zip(x.data())
                            .map(|(&gv, &xv)| {
                                if xv > T::zero() {
                                    gv
                                } else if xv < T::zero() {
                                    -gv
                                } else {
                                    T::zero()
                                }
                            })
                            .collect(),
                    );
                }
                Op::Outer(a, b) => {
                    let (av, bv) = (val(*a), val(*b));
                    let (da, db) = outer_grads(av.data(), bv.data(), &g);
                    acc(*a, da);
                    acc(*b, db);
                }
                Op::RowOuter(a, b) => {
                    let (av, bv) = (val(*a), val(*b));
                    let (rows, m, n) = (av.shape()[0], av.shape()[1], bv.shape()[1]);
                    let mut da = Vec::with_capacity(rows * m);
                    let mut db = Vec::with_capacity(rows * n);
                    for r in 0..rows {
                        let (ra, rb) = outer_grads(
                            &av.data()[r * m..(r + 1) * m],
                            &bv.data()[r * n..(r + 1) * n],
                            &g[r * m * n..(r + 1) * m * n],
                        );
                        da.extend(ra);
                        db.extend(rb);
                    }
                    acc(*a, da);
                    acc(*b, db);
                }
                Op::Softmax(a, axis) => {
                    let (outer, n, inner) = axis_blocks(out.shape(), *axis);
                    let y = out.data();
                    let mut dx = vec![T::zero(); y.len()];
                    for o in 0..outer {
                        for i in 0..inner {
                            let idx = |j: usize| (o * n + j) * inner + i;
                            let dot = (0..n).fold(T::zero(), |s, j| s + g[idx(j)] * y[idx(j)]);
                            for j in 0..n {
                                dx[idx(j)] = y[idx(j)] * (g[idx(j)] - dot);
                            }
                        }
                    }
                    acc(*a, dx);
                }
                Op::LogSoftmax(a, axis) => {
                    let (outer, n, inner) = axis_blocks(out.shape(), *axis);
                    let y = out.data();
                    let mut dx = vec![T::zero(); y.len()];
                    for o in 0..outer {
                        for i in 0..inner {
                            let idx = |j: usize| (o * n + j) * inner + i;
                            let total = (0..n).fold(T::zero(), |s, j| s + g[idx(j)]);
                            for j in 0..n {
                                dx[idx(j)] = g[idx(j)] - y[idx(j)].exp() * total;
                            }
                        }
                    }
                    acc(*a, dx);
                }
                Op::Concat(parts, axis) => {
                    let (outer, _, inner) = axis_blocks(out.shape(), *axis);
                    let extents: Vec<usize> =
                        parts.iter().map(|&p| val(p).shape()[*axis]).collect();
                    let row: usize = extents.iter().sum::<usize>() * inner;
                    let mut offset = 0;
                    for (&p, &ext) in parts.iter().zip(&extents) {
                        let chunk = ext * inner;
                        let mut dp = Vec::with_capacity(outer * chunk);
                        for o in 0..outer {
                            let start = o * row + offset;
                            dp.extend_from_slice(&g[start..start + chunk]);
                        }
                        acc(p, dp);
                        offset += chunk;
                    }
                }
                Op::Slice { input, axis, start } => {
                    let in_shape = val(*input).shape().to_vec();
                    let (outer, full, inner) = axis_blocks(&in_shape, *axis);
                    let len = out.shape()[*axis];
                    let mut dx = vec![T::zero(); outer * full * inner];
                    for o in 0..outer {
                        let src = o * len * inner;
                        let dst = (o * full + start) * inner;
                        dx[dst..dst + len * inner].copy_from_slice(&g[src..src + len * inner]);
                    }
                    acc(*input, dx);
                }
                Op::Reshape(a) => acc(*a, g),
                Op::SumAxis(a, axis) => {
                    let in_shape = val(*a).shape().to_vec();
                    let (outer, n, inner) = axis_blocks(&in_shape, *axis);
                    let mut dx = vec![T::zero(); outer * n * inner];
                    for o in 0..outer {
                        for j in 0..n {
                            for i in 0..inner {
                                dx[(o * n + j) * inner + i] = g[o * inner + i];
                            }
                        }
                    }
                    acc(*a, dx);
                }
                Op::Sum(a) => acc(*a, vec![g[0]; val(*a).len()]),
                Op::Mean(a) => {
                    let n = val(*a).len();
                    acc(*a, vec![g[0] / T::from_usize(n).unwrap(); n]);
                }
                Op::ScaleRows(x, s) => {
                    let (xv, sv) = (val(*x), val(*s));
                    let cols = xv.shape()[1];
                    let mut dx = Vec::with_capacity(g.len());
                    let mut ds = Vec::with_capacity(sv.len());
                    for (r, &sr) in sv.data().iter().enumerate() {
                        let gr = &g[r * cols..(r + 1) * cols];
                        let xr = &xv.data()[r * cols..(r + 1) * cols];
                        dx.extend(gr.iter().map(|&v| v * sr));
                        ds.push(gr.iter().zip(xr).fold(T::zero(), |a, (&u, &w)| a + u * w));
                    }
                    acc(*x, dx);
                    acc(*s, ds);
                }
                Op::Mask(a, mask) => {
                    acc(*a, g.iter().zip(mask).map(|(&v, &m)| v * m).collect());
                }
            }
        }
        Ok(Gradients { grads: leaf_grads })
    }
}

fn outer_grads<T: Scalar>(a: &[T], b: &[T], g: &[T]) -> (Vec<T>, Vec<T>) {
    let n = b.len();
    let mut da = vec![T::zero(); a.len()];
    let mut db = vec![T::zero(); n];
    for (i, &ai) in a.iter().enumerate() {
        let row = &g[i * n..(i + 1) * n];
        da[i] = row.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y);
        for (d, &x) in db.iter_mut().zip(row) {
            *d = *d + x * ai;
        }
    }
    (da, db)
}

impl<'t, T: Scalar> Var<'t, T> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape(&self) -> &'t Tape<T> {
        self.tape
    }

    pub fn value(&self) -> Rc<Tensor<T>> {
        self.tape.value(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.nodes.borrow()[self.id].value.shape().to_vec()
    }

    fn unary(self, op: Op<T>, f: impl Fn(T) -> T) -> Self {
        let out = self.value().map(f);
        self.tape.push(out, op, &[self.id])
    }

    fn same_shape(
        self,
        other: Self,
        op: &'static str,
    ) -> Result<(Rc<Tensor<T>>, Rc<Tensor<T>>), TensorError> {
        let (a, b) = (self.value(), other.value());
        if a.shape() != b.shape() {
            return Err(TensorError::ShapeMismatch {
                op,
                left: a.shape().to_vec(),
                right: b.shape().to_vec(),
            });
        }
        Ok((a, b))
    }

    fn zip_with(
        self,
        other: Self,
        op: &'static str,
        node: Op<T>,
        f: impl Fn(T, T) -> T,
    ) -> Result<Self, TensorError> {
        let (a, b) = self.same_shape(other, op)?;
        let data = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let out = Tensor {
            shape: a.shape().to_vec(),
            data,
        };
        Ok(self.tape.push(out, node, &[self.id, other.id]))
    }

    pub fn matmul(self, other: Self) -> Result<Self, TensorError> {
        let out = self.value().matmul(&other.value())?;
        Ok(self
            .tape
            .push(out, Op::MatMul(self.id, other.id), &[self.id, other.id]))
    }

    pub fn transpose(self) -> Result<Self, TensorError> {
        let out = self.value().transpose()?;
        Ok(self.tape.push(out, Op::Transpose(self.id), &[self.id]))
    }

    pub fn add(self, other: Self) -> Result<Self, TensorError> {
        self.zip_with(other, "add", Op::Add(self.id, other.id), |a, b| a + b)
    }

    pub fn sub(self, other: Self) -> Result<Self, TensorError> {
        self.zip_with(other, "sub", Op::Sub(self.id, other.id), |a, b| a - b)
    }

    pub fn mul(self, other: Self) -> Result<Self, TensorError> {
        self.zip_with(other, "mul", Op::Mul(self.id, other.id), |a, b| a * b)
    }

    /// Adds a vector `[n]` to every length-`n` row of `self` (last axis `n`).
    pub fn add_bias(self, bias: Self) -> Result<Self, TensorError> {
        let (x, b) = (self.value(), bias.value());
        let n = b.len();
        if b.rank() != 1 || x.shape().last() != Some(&n) {
            return Err(TensorError::ShapeMismatch {
                op: "add_bias",
                left: x.shape().to_vec(),
                right: b.shape().to_vec(),
            });
        }
        let data = x
            .data()
            .chunks(n)
            .flat_map(|row| row.iter().zip(b.data()).map(|(&u, &v)| u + v))
            .collect();
        let out = Tensor {
            shape: x.shape().to_vec(),
            data,
        };
        Ok(self
            .tape
            .push(out, Op::AddBias(self.id, bias.id), &[self.id, bias.id]))
    }

    pub fn scale(self, c: T) -> Self {
        self.unary(Op::Scale(self.id, c), |v| v * c)
    }

    pub fn relu(self) -> Self {
        self.unary(
            Op::Relu(self.id),
            |v| if v > T::zero() { v } else { T::zero() },
        )
    }

    pub fn tanh(self) -> Self {
        self.unary(Op::Tanh(self.id), T::tanh)
    }

    pub fn sigmoid(self) -> Self {
        self.unary(Op::Sigmoid(self.id), |v| T::one() / (T::one() + (-v).exp()))
    }

    pub fn abs(self) -> Self {
        self.unary(Op::Abs(self.id), T::abs)
    }

    /// Outer product of two vectors: `out[i][j] = a[i] * b[j]`.
    pub fn outer(self, other: Self) -> Result<Self, TensorError> {
        let (a, b) = (self.value(), other.value());
        for t in [&a, &b] {
            if t.rank() != 1 {
                return Err(TensorError::Rank {
                    op: "outer",
                    expected: 1,
                    shape: t.shape().to_vec(),
                });
            }
        }
        let data = a
            .data()
            .iter()
            .flat_map(|&x| b.data().iter().map(move |&y| x * y))
            .collect();
        let out = Tensor {
            shape: vec![a.len(), b.len()],
            data,
        };
        Ok(self
            .tape
            .push(out, Op::Outer(self.id, other.id), &[self.id, other.id]))
    }

    /// Row-wise outer product, flattened: `[B×m] ⊗ [B×n] -> [B×(m·n)]`,
    /// row-major with `self` indexing the outer block.
    pub fn row_outer(self, other: Self) -> Result<Self, TensorError> {
        let (a, b) = (self.value(), other.value());
        if a.rank() != 2 || b.rank() != 2 || a.shape()[0] != b.shape()[0] {
            return Err(TensorError::ShapeMismatch {
                op: "row_outer",
                left: a.shape().to_vec(),
                right: b.shape().to_vec(),
            });
        }
        let (rows, m, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
        let mut data = Vec::with_capacity(rows * m * n);
        for r in 0..rows {
            let rb = &b.data()[r * n..(r + 1) * n];
            for &x in &a.data()[r * m..(r + 1) * m] {
                data.extend(rb.iter().map(|&y| x * y));
            }
        }
        let out = Tensor {
            shape: vec![rows, m * n],
            data,
        };
        Ok(self
            .tape
            .push(out, Op::RowOuter(self.id, other.id), &[self.id, other.id]))
    }

    fn check_axis(&self, op: &'static str, axis: usize) -> Result<Vec<usize>, TensorError> {
        let shape = self.shape();
        if axis >= shape.len() {
            return Err(TensorError::Rank {
                op,
                expected: axis + 1,
                shape,
            });
        }
        if shape[axis] == 0 {
            return Err(TensorError::Domain {
                op,
                detail: format!("axis {axis} of {shape:?} is empty"),
            });
        }
        Ok(shape)
    }

    /// Numerically stable softmax along `axis` (max-subtracted).
    pub fn softmax(self, axis: usize) -> Result<Self, TensorError> {
        let shape = self.check_axis("softmax", axis)?;
        let mut out = (*self.value()).clone();
        softmax_in_place(&mut out.data, &shape, axis);
        Ok(self.tape.push(out, Op::Softmax(self.id, axis), &[self.id]))
    }

    pub fn log_softmax(self, axis: usize) -> Result<Self, TensorError> {
        let shape = self.check_axis("log_softmax", axis)?;
        let mut out = (*self.value()).clone();
        let (outer, n, inner) = axis_blocks(&shape, axis);
        for o in 0..outer {
            for i in 0..inner {
                let idx = |j: usize| (o * n + j) * inner + i;
                let max = (0..n)
                    .map(|j| out.data[idx(j)])
                    .fold(T::neg_infinity(), T::max);
                let lse = (0..n)
                    .fold(T::zero(), |s, j| s + (out.data[idx(j)] - max).exp())
                    .ln()
                    + max;
                for j in 0..n {
                    out.data[idx(j)] = out.data[idx(j)] - lse;
                }
            }
        }
        Ok(self
            .tape
            .push(out, Op::LogSoftmax(self.id, axis), &[self.id]))
    }

    /// `len` entries along `axis` starting at `start`.
    pub fn slice(self, axis: usize, start: usize, len: usize) -> Result<Self, TensorError> {
        let shape = self.check_axis("slice", axis)?;
        if start + len > shape[axis] || len == 0 {
            return Err(TensorError::Domain {
                op: "slice",
                detail: format!(
                    "range {start}..{} out of bounds for {shape:?} axis {axis}",
                    start + len
                ),
            });
        }
        let (outer, full, inner) = axis_blocks(&shape, axis);
        let v = self.value();
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let from = (o * full + start) * inner;
            data.extend_from_slice(&v.data()[from..from + len * inner]);
        }
        let mut out_shape = shape;
        out_shape[axis] = len;
        let out = Tensor {
            shape: out_shape,
            data,
        };
        Ok(self.tape.push(
            out,
            Op::Slice {
                input: self.id,
                axis,
                start,
            },
            &[self.id],
        ))
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Self, TensorError> {
        let out = self.value().reshape(shape)?;
        Ok(self.tape.push(out, Op::Reshape(self.id), &[self.id]))
    }

    /// Sums over `axis`, removing it from the shape.
    pub fn sum_axis(self, axis: usize) -> Result<Self, TensorError> {
        let shape = self.check_axis("sum_axis", axis)?;
        let (outer, n, inner) = axis_blocks(&shape, axis);
        let v = self.value();
        let mut data = vec![T::zero(); outer * inner];
        for o in 0..outer {
            for j in 0..n {
                for i in 0..inner {
                    data[o * inner + i] = data[o * inner + i] + v.data()[(o * n + j) * inner + i];
                }
            }
        }
        let mut out_shape = shape;
        out_shape.remove(axis);
        let out = Tensor {
            shape: out_shape,
            data,
        };
        Ok(self.tape.push(out, Op::SumAxis(self.id, axis), &[self.id]))
    }

    pub fn sum(self) -> Self {
        let s = self.value().data().iter().fold(T::zero(), |a, &b| a + b);
        self.tape
            .push(Tensor::scalar(s), Op::Sum(self.id), &[self.id])
    }

    pub fn mean(self) -> Self {
        let v = self.value();
        let s = v.data().iter().fold(T::zero(), |a, &b| a + b);
        let m = s / T::from_usize(v.len().max(1)).unwrap();
        self.tape
            .push(Tensor::scalar(m), Op::Mean(self.id), &[self.id])
    }

    /// Multiplies row `r` of a `[B×n]` matrix by `scales[r]`.
    pub fn scale_rows(self, scales: Self) -> Result<Self, TensorError> {
        let (x, s) = (self.value(), scales.value());
        if x.rank() != 2 || s.rank() != 1 || x.shape()[0] != s.len() {
            return Err(TensorError::ShapeMismatch {
                op: "scale_rows",
                left: x.shape().to_vec(),
                right: s.shape().to_vec(),
            });
        }
        let cols = x.shape()[1];
        let data = x
            .data()
            .chunks(cols.max(1))
            .zip(s.data())
            .flat_map(|(row, &c)| row.iter().map(move |&v| v * c))
            .collect();
        let out = Tensor {
            shape: x.shape().to_vec(),
            data,
        };
        Ok(self.tape.push(
            out,
            Op::ScaleRows(self.id, scales.id),
            &[self.id, scales.id],
        ))
    }

    /// Inverted dropout. Identity when `training` is false or `rate` is 0.
    pub fn dropout<R: Rng + ?Sized>(
        self,
        rate: f64,
        training: bool,
        rng: &mut R,
    ) -> Result<Self, TensorError> {
        if !(0.0..1.0).contains(&rate) {
            return Err(TensorError::Domain {
                op: "dropout",
                detail: format!("rate {rate} outside [0, 1)"),
            });
        }
        if !training || rate == 0.0 {
            return Ok(self);
        }
        let keep = T::from_f64_lossy(1.0 / (1.0 - rate));
        let v = self.value();
        let mask: Vec<T> = (0..v.len())
            .map(|_| {
                if rng.gen::<f64>() < rate {
                    T::zero()
                } else {
                    keep
                }
            })
            .collect();
        let data = v.data().iter().zip(&mask).map(|(&x, &m)| x * m).collect();
        let out = Tensor {
            shape: v.shape().to_vec(),
            data,
        };
        Ok(self.tape.push(out, Op::Mask(self.id, mask), &[self.id]))
    }
}
