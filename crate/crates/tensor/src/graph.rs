//! Define-by-run tape. Every op appends a node holding its output value and
//! whatever it needs for the backward sweep; `backward` walks the nodes in
//! exact reverse order of creation.

use std::collections::HashMap;

use crate::error::{ensure_arg, invalid_arg, Result};
use crate::ops::{self, Conv1dGeom, Conv2dGeom, Pool2dGeom};
use crate::scalar::Scalar;
use crate::store::{BufferId, BufferUpdates, Gradients, ParamId, ParamStore};
use crate::tensor::Tensor;

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

/// Train mode uses batch statistics and active dropout; eval mode is deterministic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Mode {
    #[default]
    Train,
    Eval,
}

pub(crate) enum Op<T> {
    Leaf,
    Param(ParamId),
    Conv1d { x: Var, w: Var, geom: Conv1dGeom },
    Conv2d { x: Var, w: Var, geom: Conv2dGeom },
    MaxPool1d { x: Var, argmax: Vec<usize> },
    AvgPool2d { x: Var, geom: Pool2dGeom },
    BatchNorm(Box<ops::norm::BatchNormCtx<T>>),
    Relu { x: Var },
    Sigmoid { x: Var },
    Tanh { x: Var },
    Affine { x: Var, scale: T },
    MatMul { x: Var, w: Var, m: usize, k: usize, n: usize },
    Add { a: Var, b: Var },
    Mul { a: Var, b: Var },
    Dropout { x: Var, mask: Vec<T> },
    SoftmaxCrossEntropy { logits: Var, probs: Vec<T>, targets: Vec<T>, batch: usize },
    Reshape { x: Var },
    Permute { x: Var, perm: Vec<usize> },
    Concat { inputs: Vec<Var>, axis: usize },
    Narrow { x: Var, axis: usize, start: usize },
    MeanReduce { x: Var },
    MaxReduce { x: Var, argmax: Vec<usize> },
    SumAll { x: Var },
}

pub(crate) struct Node<T> {
    value: Option<Tensor<T>>,
    op: Op<T>,
    needs_grad: bool,
}

/// A single forward/backward computation over parameters borrowed from a
/// [`ParamStore`]. One graph is not meant to be shared across threads.
pub struct Graph<'p, T: Scalar> {
    store: &'p ParamStore<T>,
    nodes: Vec<Node<T>>,
    param_nodes: HashMap<ParamId, Var>,
    updates: Vec<(BufferId, Vec<T>)>,
}

impl<'p, T: Scalar> Graph<'p, T> {
    pub fn new(store: &'p ParamStore<T>) -> Self {
        Self { store, nodes: Vec::new(), param_nodes: HashMap::new(), updates: Vec::new() }
    }

    pub fn store(&self) -> &'p ParamStore<T> {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => self.store.param(*id),
            _ => unreachable!("node without value"),
        }
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    /// Constant input; receives no gradient.
    pub fn input(&mut self, t: Tensor<T>) -> Var {
        self.push_raw(Some(t), Op::Leaf, false)
    }

    /// Input leaf whose gradient is reported by [`Gradients::wrt`].
    pub fn input_with_grad(&mut self, t: Tensor<T>) -> Var {
        self.push_raw(Some(t), Op::Leaf, true)
    }

    /// Leaf for a stored parameter. Repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(&v) = self.param_nodes.get(&id) {
            return v;
        }
        let v = self.push_raw(None, Op::Param(id), true);
        self.param_nodes.insert(id, v);
        v
    }

    pub(crate) fn buffer(&self, id: BufferId) -> &Tensor<T> {
        self.store.buffer(id)
    }

    pub(crate) fn record_update(&mut self, id: BufferId, data: Vec<T>) {
        self.updates.push((id, data));
    }

    /// Running-statistic updates produced by train-mode batch norm.
    pub fn take_buffer_updates(&mut self) -> BufferUpdates<T> {
        BufferUpdates(std::mem::take(&mut self.updates))
    }

    /// Hash of every piecewise branch taken on the tape: ReLU activity and
    /// max-pooling winners. Two evaluations with equal signatures lie on the
    /// same smooth piece of the loss.
    pub fn branch_signature(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for (i, node) in self.nodes.iter().enumerate() {
            match &node.op {
                Op::Relu { x } => {
                    i.hash(&mut h);
                    for v in self.value(*x).data() {
                        (*v > T::zero()).hash(&mut h);
                    }
                }
                Op::MaxPool1d { argmax, .. } | Op::MaxReduce { argmax, .. } => {
                    i.hash(&mut h);
                    argmax.hash(&mut h);
                }
                _ => {}
            }
        }
        h.finish()
    }

    fn push_raw(&mut self, value: Option<Tensor<T>>, op: Op<T>, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    pub(crate) fn needs_grad(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Appends an op node; gradient tracking is inherited from `parents`.
    pub(crate) fn push(&mut self, value: Tensor<T>, op: Op<T>, parents: &[Var]) -> Var {
        let needs = parents.iter().any(|&p| self.needs_grad(p));
        self.push_raw(Some(value), op, needs)
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        let lt = self.value(loss);
        ensure_arg!(lt.len() == 1, "backward needs a scalar loss, got shape {:?}", lt.shape());
        let mut sink = GradSink {
            grads: (0..=loss.0).map(|_| None).collect(),
            needs: self.nodes[..=loss.0].iter().map(|n| n.needs_grad).collect(),
        };
        sink.grads[loss.0] = Some(vec![T::one()]);
        let mut out = Gradients::default();
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {
                    if let Some(g) = sink.grads[idx].take() {
                        out.leaves.insert(idx, g);
                    }
                    continue;
                }
                Op::Param(id) => {
                    if let Some(g) = sink.grads[idx].take() {
                        out.params.push((*id, g));
                    }
                    continue;
                }
                _ => {}
            }
            let Some(g) = sink.grads[idx].take() else { continue };
            self.backward_node(&node.op, Var(idx), &g, &mut sink)?;
        }
        out.params.sort_by_key(|(id, _)| *id);
        Ok(out)
    }

    fn backward_node(&self, op: &Op<T>, out: Var, g: &[T], sink: &mut GradSink<T>) -> Result<()> {
        match op {
            Op::Leaf | Op::Param(_) => {}
            Op::Conv1d { x, w, geom } => ops::conv::conv1d_backward(self, *x, *w, geom, g, sink),
            Op::Conv2d { x, w, geom } => ops::conv::conv2d_backward(self, *x, *w, geom, g, sink),
            Op::MaxPool1d { x, argmax } | Op::MaxReduce { x, argmax } => {
                if let Some(dx) = sink.slot(*x, self.value(*x).len()) {
                    for (&i, &gv) in argmax.iter().zip(g) {
                        dx[i] = dx[i] + gv;
                    }
                }
            }
            Op::AvgPool2d { x, geom } => ops::pool::avgpool2d_backward(self, *x, geom, g, sink),
            Op::BatchNorm(ctx) => ops::norm::batchnorm_backward(self, ctx, g, sink),
            Op::Relu { x } => {
                let xv = self.value(*x).data();
                if let Some(dx) = sink.slot(*x, xv.len()) {
                    for ((d, &xi), &gi) in dx.iter_mut().zip(xv).zip(g) {
                        if xi > T::zero() {
                            *d = *d + gi;
                        }
                    }
                }
            }
            Op::Sigmoid { x } => {
                let y = self.value(out).data();
                if let Some(dx) = sink.slot(*x, y.len()) {
                    for ((d, &yi), &gi) in dx.iter_mut().zip(y).zip(g) {
                        *d = *d + gi * yi * (T::one() - yi);
                    }
                }
            }
            Op::Tanh { x } => {
                let y = self.value(out).data();
                if let Some(dx) = sink.slot(*x, y.len()) {
                    for ((d, &yi), &gi) in dx.iter_mut().zip(y).zip(g) {
                        *d = *d + gi * (T::one() - yi * yi);
                    }
                }
            }
            Op::Affine { x, scale } => {
                if let Some(dx) = sink.slot(*x, g.len()) {
                    for (d, &gi) in dx.iter_mut().zip(g) {
                        *d = *d + gi * *scale;
                    }
                }
            }
            Op::MatMul { x, w, m, k, n } => {
                if let Some(dx) = sink.slot(*x, m * k) {
                    T::gemm(*m, *n, *k, g, false, self.value(*w).data(), true, T::one(), dx);
                }
                if let Some(dw) = sink.slot(*w, k * n) {
                    T::gemm(*k, *m, *n, self.value(*x).data(), true, g, false, T::one(), dw);
                }
            }
            Op::Add { a, b } => ops::shape::broadcast_add_backward(self, *a, *b, out, g, sink),
            Op::Mul { a, b } => ops::shape::broadcast_mul_backward(self, *a, *b, out, g, sink),
            Op::Dropout { x, mask } => {
                if let Some(dx) = sink.slot(*x, g.len()) {
                    for ((d, &m), &gi) in dx.iter_mut().zip(mask).zip(g) {
                        *d = *d + gi * m;
                    }
                }
            }
            Op::SoftmaxCrossEntropy { logits, probs, targets, batch } => {
                // d/dz of mean_b(-Σ t log softmax(z)) = (p·Σt - t) / B, with Σt = 1.
                let inv_b = T::one() / T::from(*batch).unwrap();
                if let Some(dz) = sink.slot(*logits, probs.len()) {
                    for ((d, &p), &t) in dz.iter_mut().zip(probs).zip(targets) {
                        *d = *d + g[0] * (p - t) * inv_b;
                    }
                }
            }
            Op::Reshape { x } => {
                if let Some(dx) = sink.slot(*x, g.len()) {
                    for (d, &gi) in dx.iter_mut().zip(g) {
                        *d = *d + gi;
                    }
                }
            }
            Op::Permute { x, perm } => ops::shape::permute_backward(self, *x, perm, g, sink),
            Op::Concat { inputs, axis } => {
                ops::shape::concat_backward(self, inputs, *axis, g, sink)
            }
            Op::Narrow { x, axis, start } => {
                ops::shape::narrow_backward(self, *x, *axis, *start, out, g, sink)
            }
            Op::MeanReduce { x } => ops::shape::mean_reduce_backward(self, *x, out, g, sink),
            Op::SumAll { x } => {
                if let Some(dx) = sink.slot(*x, self.value(*x).len()) {
                    for d in dx.iter_mut() {
                        *d = *d + g[0];
                    }
                }
            }
        }
        Ok(())
    }
}

/// Accumulates gradient contributions into per-node buffers.
pub(crate) struct GradSink<T> {
    grads: Vec<Option<Vec<T>>>,
    needs: Vec<bool>,
}

impl<T: Scalar> GradSink<T> {
    /// Zero-initialized accumulation buffer for `v`, or `None` when `v`
    /// does not lead to any parameter or tracked input.
    pub(crate) fn slot(&mut self, v: Var, len: usize) -> Option<&mut [T]> {
        if !self.needs[v.0] {
            return None;
        }
        let buf = self.grads[v.0].get_or_insert_with(|| vec![T::zero(); len]);
        debug_assert_eq!(buf.len(), len);
        Some(buf.as_mut_slice())
    }
}

pub(crate) fn check_mode_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(invalid_arg!("dropout rate must lie in [0, 1), got {rate}"));
    }
    Ok(())
}
