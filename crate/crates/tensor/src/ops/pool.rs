use crate::error::{ensure_arg, Result};
use crate::graph::{GradSink, Graph, Op, Var};
use crate::ops::conv::{batch_of, conv_out_len};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pool2dGeom {
    pub planes: usize,
    pub in_hw: (usize, usize),
    pub window: (usize, usize),
    pub stride: (usize, usize),
    pub out_hw: (usize, usize),
}

impl<'p, T: Scalar> Graph<'p, T> {
    /// Max over sliding windows of the last axis of `[B, C, L]` or `[C, L]`.
    /// Ties resolve to the lowest index, which also receives the gradient.
    pub fn maxpool1d(&mut self, x: Var, window: usize, stride: usize) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        batch_of(&xs, 2, "maxpool1d")?;
        ensure_arg!(window >= 1 && stride >= 1, "maxpool1d window and stride must be positive");
        let len = *xs.last().unwrap();
        ensure_arg!(len >= window, "maxpool1d input length {len} is shorter than window {window}");
        let out_len = conv_out_len(len, window, stride, 0).unwrap();
        let rows = xs.iter().rev().skip(1).product::<usize>();
        let xd = self.value(x).data();
        let mut out = Vec::with_capacity(rows * out_len);
        let mut argmax = Vec::with_capacity(rows * out_len);
        for r in 0..rows {
            let row = &xd[r * len..(r + 1) * len];
            for t in 0..out_len {
                let start = t * stride;
                let mut best = start;
                for i in start + 1..start + window {
                    if row[i] > row[best] {
                        best = i;
                    }
                }
                out.push(row[best]);
                argmax.push(r * len + best);
            }
        }
        let mut shape = xs;
        *shape.last_mut().unwrap() = out_len;
        let value = Tensor::new(shape, out)?;
        Ok(self.push(value, Op::MaxPool1d { x, argmax }, &[x]))
    }

    /// Max over the whole temporal axis: `[B, C, L] → [B, C, 1]`.
    pub fn global_maxpool1d(&mut self, x: Var) -> Result<Var> {
        let len = *self.shape(x).last().unwrap_or(&0);
        self.maxpool1d(x, len, len.max(1))
    }

    /// Mean over 2-D windows of `[B, C, H, W]` or `[C, H, W]`.
    pub fn avgpool2d(&mut self, x: Var, window: (usize, usize), stride: (usize, usize)) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        batch_of(&xs, 3, "avgpool2d")?;
        let r = xs.len();
        let (h, w) = (xs[r - 2], xs[r - 1]);
        ensure_arg!(
            window.0 >= 1 && window.1 >= 1 && stride.0 >= 1 && stride.1 >= 1,
            "avgpool2d window and stride must be positive"
        );
        ensure_arg!(
            h >= window.0 && w >= window.1,
            "avgpool2d window {window:?} is larger than input {:?}",
            (h, w)
        );
        let geom = Pool2dGeom {
            planes: xs[..r - 2].iter().product(),
            in_hw: (h, w),
            window,
            stride,
            out_hw: (
                conv_out_len(h, window.0, stride.0, 0).unwrap(),
                conv_out_len(w, window.1, stride.1, 0).unwrap(),
            ),
        };
        let (oh, ow) = geom.out_hw;
        let inv = T::one() / T::from(window.0 * window.1).unwrap();
        let xd = self.value(x).data();
        let mut out = vec![T::zero(); geom.planes * oh * ow];
        for p in 0..geom.planes {
            let plane = &xd[p * h * w..(p + 1) * h * w];
            for y in 0..oh {
                for xo in 0..ow {
                    let mut acc = T::zero();
                    for i in 0..window.0 {
                        let rowoff = (y * stride.0 + i) * w + xo * stride.1;
                        for j in 0..window.1 {
                            acc = acc + plane[rowoff + j];
                        }
                    }
                    out[(p * oh + y) * ow + xo] = acc * inv;
                }
            }
        }
        let mut shape = xs;
        shape[r - 2] = oh;
        shape[r - 1] = ow;
        let value = Tensor::new(shape, out)?;
        Ok(self.push(value, Op::AvgPool2d { x, geom }, &[x]))
    }
}

pub(crate) fn avgpool2d_backward<T: Scalar>(
    g: &Graph<'_, T>,
    x: Var,
    geom: &Pool2dGeom,
    dy: &[T],
    sink: &mut GradSink<T>,
) {
    let (h, w) = geom.in_hw;
    let (oh, ow) = geom.out_hw;
    let inv = T::one() / T::from(geom.window.0 * geom.window.1).unwrap();
    let Some(dx) = sink.slot(x, g.value(x).len()) else { return };
    for p in 0..geom.planes {
        let plane = &mut dx[p * h * w..(p + 1) * h * w];
        for y in 0..oh {
            for xo in 0..ow {
                let gv = dy[(p * oh + y) * ow + xo] * inv;
                for i in 0..geom.window.0 {
                    let rowoff = (y * geom.stride.0 + i) * w + xo * geom.stride.1;
                    for j in 0..geom.window.1 {
                        plane[rowoff + j] = plane[rowoff + j] + gv;
                    }
                }
            }
        }
    }
}
