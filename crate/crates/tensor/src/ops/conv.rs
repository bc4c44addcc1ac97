//! Bias-free 1-D and 2-D convolution (cross-correlation) via im2col + GEMM.
//!
//! Inputs are `[B, C, L]` / `[B, C, H, W]`; the unbatched forms `[C, L]` and
//! `[C, H, W]` are accepted and produce unbatched outputs.

use crate::error::{ensure_arg, Result};
use crate::graph::{GradSink, Graph, Op, Var};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv1dGeom {
    pub batch: usize,
    pub batched: bool,
    pub c_in: usize,
    pub c_out: usize,
    pub len: usize,
    pub kernel: usize,
    pub stride: usize,
    pub out_len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv2dGeom {
    pub batch: usize,
    pub batched: bool,
    pub c_in: usize,
    pub c_out: usize,
    pub in_hw: (usize, usize),
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub pad: (usize, usize),
    pub out_hw: (usize, usize),
}

/// `floor((len + 2·pad − kernel) / stride) + 1`, or `None` on underflow.
pub fn conv_out_len(len: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    let padded = len + 2 * pad;
    if stride == 0 || kernel == 0 || padded < kernel {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

/// Splits an optional leading batch axis: returns `(batch, batched)`.
pub(crate) fn batch_of(shape: &[usize], unbatched_rank: usize, what: &str) -> Result<(usize, bool)> {
    if shape.len() == unbatched_rank {
        Ok((1, false))
    } else if shape.len() == unbatched_rank + 1 {
        Ok((shape[0], true))
    } else {
        Err(crate::error::invalid_arg!(
            "{what} expects rank {unbatched_rank} or {} input, got shape {shape:?}",
            unbatched_rank + 1
        ))
    }
}

impl Conv1dGeom {
    fn cols_rows(&self) -> usize {
        self.c_in * self.kernel
    }

    fn im2col<T: Scalar>(&self, x: &[T], cols: &mut [T]) {
        for i in 0..self.c_in {
            let xr = &x[i * self.len..(i + 1) * self.len];
            for k in 0..self.kernel {
                let row = &mut cols[(i * self.kernel + k) * self.out_len..][..self.out_len];
                if self.stride == 1 {
                    row.copy_from_slice(&xr[k..k + self.out_len]);
                } else {
                    for (t, c) in row.iter_mut().enumerate() {
                        *c = xr[t * self.stride + k];
                    }
                }
            }
        }
    }

    fn col2im<T: Scalar>(&self, cols: &[T], dx: &mut [T]) {
        for i in 0..self.c_in {
            let dr = &mut dx[i * self.len..(i + 1) * self.len];
            for k in 0..self.kernel {
                let row = &cols[(i * self.kernel + k) * self.out_len..][..self.out_len];
                for (t, &c) in row.iter().enumerate() {
                    let idx = t * self.stride + k;
                    dr[idx] = dr[idx] + c;
                }
            }
        }
    }
}

impl Conv2dGeom {
    fn cols_rows(&self) -> usize {
        self.c_in * self.kernel.0 * self.kernel.1
    }

    fn out_area(&self) -> usize {
        self.out_hw.0 * self.out_hw.1
    }

    /// Calls `f(col_row, col_index, input_offset)` for every in-bounds tap.
    fn for_each_tap(&self, mut f: impl FnMut(usize, usize, usize)) {
        let (h, w) = self.in_hw;
        let (kh, kw) = self.kernel;
        let (sh, sw) = self.stride;
        let (ph, pw) = self.pad;
        let (oh, ow) = self.out_hw;
        for i in 0..self.c_in {
            for ki in 0..kh {
                for kj in 0..kw {
                    let row = (i * kh + ki) * kw + kj;
                    for y in 0..oh {
                        let iy = (y * sh + ki) as isize - ph as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let base = (i * h + iy as usize) * w;
                        for x in 0..ow {
                            let ix = (x * sw + kj) as isize - pw as isize;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            f(row, y * ow + x, base + ix as usize);
                        }
                    }
                }
            }
        }
    }

    fn im2col<T: Scalar>(&self, x: &[T], cols: &mut [T]) {
        cols.iter_mut().for_each(|c| *c = T::zero());
        let area = self.out_area();
        self.for_each_tap(|row, col, off| cols[row * area + col] = x[off]);
    }

    fn col2im<T: Scalar>(&self, cols: &[T], dx: &mut [T]) {
        let area = self.out_area();
        self.for_each_tap(|row, col, off| dx[off] = dx[off] + cols[row * area + col]);
    }
}

impl<'p, T: Scalar> Graph<'p, T> {
    /// Valid (unpadded) strided 1-D convolution without bias.
    pub fn conv1d(&mut self, x: Var, w: Var, stride: usize) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        let ws = self.shape(w).to_vec();
        let (batch, batched) = batch_of(&xs, 2, "conv1d")?;
        ensure_arg!(ws.len() == 3, "conv1d weight must be [C_out, C_in, K], got {ws:?}");
        ensure_arg!(stride >= 1, "conv1d stride must be positive");
        let (c_in, len) = (xs[xs.len() - 2], xs[xs.len() - 1]);
        ensure_arg!(
            ws[1] == c_in,
            "conv1d input has {c_in} channels but weight expects {}",
            ws[1]
        );
        ensure_arg!(len >= ws[2], "conv1d input length {len} is shorter than kernel {}", ws[2]);
        let geom = Conv1dGeom {
            batch,
            batched,
            c_in,
            c_out: ws[0],
            len,
            kernel: ws[2],
            stride,
            out_len: conv_out_len(len, ws[2], stride, 0).expect("checked above"),
        };
        let mut out = vec![T::zero(); batch * geom.c_out * geom.out_len];
        let mut cols = vec![T::zero(); geom.cols_rows() * geom.out_len];
        let xd = self.value(x).data();
        let wd = self.value(w).data();
        for b in 0..batch {
            geom.im2col(&xd[b * c_in * len..(b + 1) * c_in * len], &mut cols);
            let ob = &mut out[b * geom.c_out * geom.out_len..(b + 1) * geom.c_out * geom.out_len];
            T::gemm(geom.c_out, geom.cols_rows(), geom.out_len, wd, false, &cols, false, T::zero(), ob);
        }
        let shape = if batched {
            vec![batch, geom.c_out, geom.out_len]
        } else {
            vec![geom.c_out, geom.out_len]
        };
        let value = Tensor::new(shape, out)?;
        Ok(self.push(value, Op::Conv1d { x, w, geom }, &[x, w]))
    }

    /// Zero-padded strided 2-D convolution without bias.
    pub fn conv2d(
        &mut self,
        x: Var,
        w: Var,
        stride: (usize, usize),
        pad: (usize, usize),
    ) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        let ws = self.shape(w).to_vec();
        let (batch, batched) = batch_of(&xs, 3, "conv2d")?;
        ensure_arg!(ws.len() == 4, "conv2d weight must be [C_out, C_in, Kh, Kw], got {ws:?}");
        ensure_arg!(stride.0 >= 1 && stride.1 >= 1, "conv2d stride must be positive");
        let r = xs.len();
        let (c_in, h, wd_) = (xs[r - 3], xs[r - 2], xs[r - 1]);
        ensure_arg!(
            ws[1] == c_in,
            "conv2d input has {c_in} channels but weight expects {}",
            ws[1]
        );
        let oh = conv_out_len(h, ws[2], stride.0, pad.0);
        let ow = conv_out_len(wd_, ws[3], stride.1, pad.1);
        let (Some(oh), Some(ow)) = (oh, ow) else {
            return Err(crate::error::invalid_arg!(
                "conv2d padded input {:?} is smaller than kernel {:?}",
                (h + 2 * pad.0, wd_ + 2 * pad.1),
                (ws[2], ws[3])
            ));
        };
        let geom = Conv2dGeom {
            batch,
            batched,
            c_in,
            c_out: ws[0],
            in_hw: (h, wd_),
            kernel: (ws[2], ws[3]),
            stride,
            pad,
            out_hw: (oh, ow),
        };
        let area = geom.out_area();
        let in_sz = c_in * h * wd_;
        let mut out = vec![T::zero(); batch * geom.c_out * area];
        let mut cols = vec![T::zero(); geom.cols_rows() * area];
        let xd = self.value(x).data();
        let wdat = self.value(w).data();
        for b in 0..batch {
            geom.im2col(&xd[b * in_sz..(b + 1) * in_sz], &mut cols);
            let ob = &mut out[b * geom.c_out * area..(b + 1) * geom.c_out * area];
            T::gemm(geom.c_out, geom.cols_rows(), area, wdat, false, &cols, false, T::zero(), ob);
        }
        let shape = if batched {
            vec![batch, geom.c_out, oh, ow]
        } else {
            vec![geom.c_out, oh, ow]
        };
        let value = Tensor::new(shape, out)?;
        Ok(self.push(value, Op::Conv2d { x, w, geom }, &[x, w]))
    }
}

pub(crate) fn conv1d_backward<T: Scalar>(
    g: &Graph<'_, T>,
    x: Var,
    w: Var,
    geom: &Conv1dGeom,
    dy: &[T],
    sink: &mut GradSink<T>,
) {
    let rows = geom.cols_rows();
    let in_sz = geom.c_in * geom.len;
    let out_sz = geom.c_out * geom.out_len;
    let xd = g.value(x).data();
    let wd = g.value(w).data();
    let mut cols = vec![T::zero(); rows * geom.out_len];
    if let Some(dw) = sink.slot(w, geom.c_out * rows) {
        for b in 0..geom.batch {
            geom.im2col(&xd[b * in_sz..(b + 1) * in_sz], &mut cols);
            let dyb = &dy[b * out_sz..(b + 1) * out_sz];
            T::gemm(geom.c_out, geom.out_len, rows, dyb, false, &cols, true, T::one(), dw);
        }
    }
    if let Some(dx) = sink.slot(x, geom.batch * in_sz) {
        for b in 0..geom.batch {
            let dyb = &dy[b * out_sz..(b + 1) * out_sz];
            T::gemm(rows, geom.c_out, geom.out_len, wd, true, dyb, false, T::zero(), &mut cols);
            geom.col2im(&cols, &mut dx[b * in_sz..(b + 1) * in_sz]);
        }
    }
}

pub(crate) fn conv2d_backward<T: Scalar>(
    g: &Graph<'_, T>,
    x: Var,
    w: Var,
    geom: &Conv2dGeom,
    dy: &[T],
    sink: &mut GradSink<T>,
) {
    let rows = geom.cols_rows();
    let area = geom.out_area();
    let in_sz = geom.c_in * geom.in_hw.0 * geom.in_hw.1;
    let out_sz = geom.c_out * area;
    let xd = g.value(x).data();
    let wd = g.value(w).data();
    let mut cols = vec![T::zero(); rows * area];
    if let Some(dw) = sink.slot(w, geom.c_out * rows) {
        for b in 0..geom.batch {
            geom.im2col(&xd[b * in_sz..(b + 1) * in_sz], &mut cols);
            let dyb = &dy[b * out_sz..(b + 1) * out_sz];
            T::gemm(geom.c_out, area, rows, dyb, false, &cols, true, T::one(), dw);
        }
    }
    if let Some(dx) = sink.slot(x, geom.batch * in_sz) {
        for b in 0..geom.batch {
            let dyb = &dy[b * out_sz..(b + 1) * out_sz];
            T::gemm(rows, geom.c_out, area, wd, true, dyb, false, T::zero(), &mut cols);
            geom.col2im(&cols, &mut dx[b * in_sz..(b + 1) * in_sz]);
        }
    }
}
