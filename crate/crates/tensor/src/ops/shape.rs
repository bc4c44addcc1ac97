//! Shape manipulation, broadcasting arithmetic and axis reductions.

use crate::error::{ensure_arg, invalid_arg, Result};
use crate::graph::{GradSink, Graph, Op, Var};
use crate::scalar::Scalar;
use crate::tensor::{numel, Tensor};

/// Shape of `a ⊙ b` when every axis pair is equal or one side is 1 (equal ranks).
pub fn broadcast_shape(a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    ensure_arg!(a.len() == b.len(), "broadcast needs equal ranks, got {a:?} and {b:?}");
    a.iter()
        .zip(b)
        .map(|(&x, &y)| match (x, y) {
            _ if x == y => Ok(x),
            (1, _) => Ok(y),
            (_, 1) => Ok(x),
            _ => Err(invalid_arg!("shapes {a:?} and {b:?} do not broadcast")),
        })
        .collect()
}

/// For every flat index of `out_shape`, the flat index of the element of
/// `in_shape` (same rank, extents equal or 1) that broadcasts onto it.
fn broadcast_map(out_shape: &[usize], in_shape: &[usize]) -> Vec<usize> {
    let rank = out_shape.len();
    let mut strides = vec![0usize; rank];
    let mut acc = 1;
    for ax in (0..rank).rev() {
        strides[ax] = if in_shape[ax] == 1 { 0 } else { acc };
        acc *= in_shape[ax];
    }
    let total = numel(out_shape);
    let mut map = Vec::with_capacity(total);
    let mut idx = vec![0usize; rank];
    let mut off = 0usize;
    for _ in 0..total {
        map.push(off);
        for ax in (0..rank).rev() {
            idx[ax] += 1;
            off += strides[ax];
            if idx[ax] < out_shape[ax] {
                break;
            }
            off -= strides[ax] * idx[ax];
            idx[ax] = 0;
        }
    }
    map
}

fn outer_inner(shape: &[usize], axis: usize) -> (usize, usize) {
    (shape[..axis].iter().product(), shape[axis + 1..].iter().product())
}

impl<'p, T: Scalar> Graph<'p, T> {
    fn binary(&mut self, a: Var, b: Var, f: impl Fn(T, T) -> T, op: Op<T>) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let out_shape = broadcast_shape(av.shape(), bv.shape())?;
        let data = if av.shape() == bv.shape() {
            av.data().iter().zip(bv.data()).map(|(&x, &y)| f(x, y)).collect()
        } else {
            let ma = broadcast_map(&out_shape, av.shape());
            let mb = broadcast_map(&out_shape, bv.shape());
            ma.iter().zip(&mb).map(|(&i, &j)| f(av.data()[i], bv.data()[j])).collect()
        };
        let value = Tensor::new(out_shape, data)?;
        Ok(self.push(value, op, &[a, b]))
    }

    /// Elementwise sum with size-1 broadcasting.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, |x, y| x + y, Op::Add { a, b })
    }

    /// Elementwise product with size-1 broadcasting.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, |x, y| x * y, Op::Mul { a, b })
    }

    pub fn reshape(&mut self, x: Var, shape: impl Into<Vec<usize>>) -> Result<Var> {
        let value = self.value(x).clone().reshape(shape)?;
        Ok(self.push(value, Op::Reshape { x }, &[x]))
    }

    /// Reorders axes so that output axis `i` is input axis `perm[i]`.
    pub fn permute(&mut self, x: Var, perm: &[usize]) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        let mut seen = vec![false; xs.len()];
        ensure_arg!(
            perm.len() == xs.len() && perm.iter().all(|&p| p < xs.len() && !std::mem::replace(&mut seen[p], true)),
            "{perm:?} is not a permutation of {} axes",
            xs.len()
        );
        let out_shape: Vec<usize> = perm.iter().map(|&p| xs[p]).collect();
        let map = permute_map(&xs, perm);
        let xd = self.value(x).data();
        let data = map.iter().map(|&i| xd[i]).collect();
        let value = Tensor::new(out_shape, data)?;
        Ok(self.push(value, Op::Permute { x, perm: perm.to_vec() }, &[x]))
    }

    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        ensure_arg!(!inputs.is_empty(), "concat of zero tensors");
        let first = self.shape(inputs[0]).to_vec();
        ensure_arg!(axis < first.len(), "concat axis {axis} out of range for {first:?}");
        let mut total = 0;
        for &v in inputs {
            let s = self.shape(v);
            ensure_arg!(
                s.len() == first.len()
                    && s.iter().enumerate().all(|(i, &d)| i == axis || d == first[i]),
                "concat shapes {first:?} and {s:?} differ off axis {axis}"
            );
            total += s[axis];
        }
        let (outer, inner) = outer_inner(&first, axis);
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &v in inputs {
                let t = self.value(v);
                let chunk = t.shape()[axis] * inner;
                data.extend_from_slice(&t.data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let mut shape = first;
        shape[axis] = total;
        let value = Tensor::new(shape, data)?;
        Ok(self.push(value, Op::Concat { inputs: inputs.to_vec(), axis }, inputs))
    }

    /// Inserts a new axis at `axis` on every input and concatenates along it.
    pub fn stack(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let expanded = inputs
            .iter()
            .map(|&v| {
                let mut s = self.shape(v).to_vec();
                ensure_arg!(axis <= s.len(), "stack axis {axis} out of range");
                s.insert(axis, 1);
                self.reshape(v, s)
            })
            .collect::<Result<Vec<_>>>()?;
        self.concat(&expanded, axis)
    }

    /// Sub-range `[start, start + len)` of one axis.
    pub fn narrow(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        ensure_arg!(axis < xs.len(), "narrow axis {axis} out of range for {xs:?}");
        ensure_arg!(
            len >= 1 && start + len <= xs[axis],
            "narrow range {start}..{} exceeds extent {}",
            start + len,
            xs[axis]
        );
        let (outer, inner) = outer_inner(&xs, axis);
        let xd = self.value(x).data();
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * xs[axis] + start) * inner;
            data.extend_from_slice(&xd[base..base + len * inner]);
        }
        let mut shape = xs;
        shape[axis] = len;
        let value = Tensor::new(shape, data)?;
        Ok(self.push(value, Op::Narrow { x, axis, start }, &[x]))
    }

    /// Index `index` of `axis`, with that axis removed.
    pub fn select(&mut self, x: Var, axis: usize, index: usize) -> Result<Var> {
        let n = self.narrow(x, axis, index, 1)?;
        let mut s = self.shape(n).to_vec();
        s.remove(axis);
        self.reshape(n, s)
    }

    /// Mean over `axes`; reduced axes are kept with extent 1 when `keepdim`.
    pub fn mean_axes(&mut self, x: Var, axes: &[usize], keepdim: bool) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        ensure_arg!(axes.iter().all(|&a| a < xs.len()), "mean axes {axes:?} out of range for {xs:?}");
        let mut kept = xs.clone();
        for &a in axes {
            kept[a] = 1;
        }
        let count = T::from(numel(&xs) / numel(&kept)).unwrap();
        let map = broadcast_map(&xs, &kept);
        let mut out = vec![T::zero(); numel(&kept)];
        for (&o, &v) in map.iter().zip(self.value(x).data()) {
            out[o] = out[o] + v;
        }
        out.iter_mut().for_each(|v| *v = *v / count);
        let value = Tensor::new(kept.clone(), out)?;
        let r = self.push(value, Op::MeanReduce { x }, &[x]);
        if keepdim {
            Ok(r)
        } else {
            let squeezed: Vec<usize> =
                kept.iter().enumerate().filter(|(i, _)| !axes.contains(i)).map(|(_, &d)| d).collect();
            if squeezed.is_empty() {
                self.reshape(r, Vec::new())
            } else {
                self.reshape(r, squeezed)
            }
        }
    }

    /// Max over one axis (kept with extent 1); ties go to the lowest index.
    pub fn max_axis(&mut self, x: Var, axis: usize) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        ensure_arg!(axis < xs.len(), "max axis {axis} out of range for {xs:?}");
        let mut kept = xs.clone();
        kept[axis] = 1;
        let map = broadcast_map(&xs, &kept);
        let xd = self.value(x).data();
        let mut argmax: Vec<Option<usize>> = vec![None; numel(&kept)];
        for (i, &o) in map.iter().enumerate() {
            match argmax[o] {
                Some(j) if xd[j] >= xd[i] => {}
                _ => argmax[o] = Some(i),
            }
        }
        let argmax: Vec<usize> = argmax.into_iter().map(Option::unwrap).collect();
        let data = argmax.iter().map(|&i| xd[i]).collect();
        let value = Tensor::new(kept, data)?;
        Ok(self.push(value, Op::MaxReduce { x, argmax }, &[x]))
    }
}

fn permute_map(xs: &[usize], perm: &[usize]) -> Vec<usize> {
    let rank = xs.len();
    let mut in_strides = vec![1usize; rank];
    for ax in (0..rank.saturating_sub(1)).rev() {
        in_strides[ax] = in_strides[ax + 1] * xs[ax + 1];
    }
    let out_shape: Vec<usize> = perm.iter().map(|&p| xs[p]).collect();
    let strides: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
    let total = numel(xs);
    let mut map = Vec::with_capacity(total);
    let mut idx = vec![0usize; rank];
    let mut off = 0usize;
    for _ in 0..total {
        map.push(off);
        for ax in (0..rank).rev() {
            idx[ax] += 1;
            off += strides[ax];
            if idx[ax] < out_shape[ax] {
                break;
            }
            off -= strides[ax] * idx[ax];
            idx[ax] = 0;
        }
    }
    map
}

fn scatter<T: Scalar>(dst: &mut [T], map: &[usize], src: impl Iterator<Item = T>) {
    for (&i, v) in map.iter().zip(src) {
        dst[i] = dst[i] + v;
    }
}

pub(crate) fn broadcast_add_backward<T: Scalar>(
    g: &Graph<'_, T>,
    a: Var,
    b: Var,
    out: Var,
    dy: &[T],
    sink: &mut GradSink<T>,
) {
    let out_shape = g.shape(out).to_vec();
    for v in [a, b] {
        let vs = g.shape(v).to_vec();
        if let Some(dv) = sink.slot(v, numel(&vs)) {
            if vs == out_shape {
                dv.iter_mut().zip(dy).for_each(|(d, &gi)| *d = *d + gi);
            } else {
                scatter(dv, &broadcast_map(&out_shape, &vs), dy.iter().copied());
            }
        }
    }
}

pub(crate) fn broadcast_mul_backward<T: Scalar>(
    g: &Graph<'_, T>,
    a: Var,
    b: Var,
    out: Var,
    dy: &[T],
    sink: &mut GradSink<T>,
) {
    let out_shape = g.shape(out).to_vec();
    let (av, bv) = (g.value(a), g.value(b));
    let ma = broadcast_map(&out_shape, av.shape());
    let mb = broadcast_map(&out_shape, bv.shape());
    if let Some(da) = sink.slot(a, av.len()) {
        let bd = bv.data();
        scatter(da, &ma, dy.iter().zip(&mb).map(|(&gi, &j)| gi * bd[j]));
    }
    if let Some(db) = sink.slot(b, bv.len()) {
        let ad = av.data();
        scatter(db, &mb, dy.iter().zip(&ma).map(|(&gi, &i)| gi * ad[i]));
    }
}

pub(crate) fn permute_backward<T: Scalar>(
    g: &Graph<'_, T>,
    x: Var,
    perm: &[usize],
    dy: &[T],
    sink: &mut GradSink<T>,
) {
    let xs = g.shape(x).to_vec();
    if let Some(dx) = sink.slot(x, numel(&xs)) {
        scatter(dx, &permute_map(&xs, perm), dy.iter().copied());
    }
}

pub(crate) fn concat_backward<T: Scalar>(
    g: &Graph<'_, T>,
    inputs: &[Var],
    axis: usize,
    dy: &[T],
    sink: &mut GradSink<T>,
) {
    let first = g.shape(inputs[0]).to_vec();
    let (outer, inner) = outer_inner(&first, axis);
    let total: usize = inputs.iter().map(|&v| g.shape(v)[axis]).sum();
    let mut col = 0;
    for &v in inputs {
        let ext = g.shape(v)[axis];
        if let Some(dv) = sink.slot(v, outer * ext * inner) {
            for o in 0..outer {
                let src = &dy[(o * total + col) * inner..][..ext * inner];
                let dst = &mut dv[o * ext * inner..][..ext * inner];
                dst.iter_mut().zip(src).for_each(|(d, &s)| *d = *d + s);
            }
        }
        col += ext;
    }
}

pub(crate) fn narrow_backward<T: Scalar>(
    g: &Graph<'_, T>,
    x: Var,
    axis: usize,
    start: usize,
    out: Var,
    dy: &[T],
    sink: &mut GradSink<T>,
) {
    let xs = g.shape(x).to_vec();
    let len = g.shape(out)[axis];
    let (outer, inner) = outer_inner(&xs, axis);
    if let Some(dx) = sink.slot(x, numel(&xs)) {
        for o in 0..outer {
            let base = (o * xs[axis] + start) * inner;
            let src = &dy[o * len * inner..][..len * inner];
            dx[base..base + len * inner].iter_mut().zip(src).for_each(|(d, &s)| *d = *d + s);
        }
    }
}

pub(crate) fn mean_reduce_backward<T: Scalar>(
    g: &Graph<'_, T>,
    x: Var,
    out: Var,
    dy: &[T],
    sink: &mut GradSink<T>,
) {
    let xs = g.shape(x).to_vec();
    let kept = g.shape(out).to_vec();
    let inv = T::one() / T::from(numel(&xs) / numel(&kept)).unwrap();
    if let Some(dx) = sink.slot(x, numel(&xs)) {
        let map = broadcast_map(&xs, &kept);
        dx.iter_mut().zip(&map).for_each(|(d, &o)| *d = *d + dy[o] * inv);
    }
}
