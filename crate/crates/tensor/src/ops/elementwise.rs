use rand::Rng;

use crate::error::{ensure_arg, Result};
use crate::graph::{check_mode_rate, Graph, Mode, Op, Var};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

impl<'p, T: Scalar> Graph<'p, T> {
    fn map_unary(&mut self, x: Var, f: impl Fn(T) -> T, op: Op<T>) -> Var {
        let xv = self.value(x);
        let data = xv.data().iter().map(|&v| f(v)).collect();
        let value = Tensor::new(xv.shape().to_vec(), data).expect("same shape");
        self.push(value, op, &[x])
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.map_unary(x, |v| if v > T::zero() { v } else { T::zero() }, Op::Relu { x })
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.map_unary(
            x,
            |v| {
                // Split by sign so exp never overflows.
                if v >= T::zero() {
                    T::one() / (T::one() + (-v).exp())
                } else {
                    let e = v.exp();
                    e / (T::one() + e)
                }
            },
            Op::Sigmoid { x },
        )
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.map_unary(x, |v| v.tanh(), Op::Tanh { x })
    }

    /// `scale · x + shift`.
    pub fn affine(&mut self, x: Var, scale: T, shift: T) -> Var {
        self.map_unary(x, |v| scale * v + shift, Op::Affine { x, scale })
    }

    pub fn scale(&mut self, x: Var, factor: T) -> Var {
        self.affine(x, factor, T::zero())
    }

    /// `1 − x`.
    pub fn one_minus(&mut self, x: Var) -> Var {
        self.affine(x, -T::one(), T::one())
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let nb = self.scale(b, -T::one());
        self.add(a, nb)
    }

    /// Product over the trailing axis: `[..., F_in] · [F_in, F_out] → [..., F_out]`.
    pub fn matmul(&mut self, x: Var, w: Var) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        let ws = self.shape(w).to_vec();
        ensure_arg!(ws.len() == 2, "weight must be [F_in, F_out], got {ws:?}");
        ensure_arg!(
            !xs.is_empty() && *xs.last().unwrap() == ws[0],
            "input trailing extent {:?} does not match weight F_in {}",
            xs.last(),
            ws[0]
        );
        let (k, n) = (ws[0], ws[1]);
        let m = self.value(x).len() / k;
        let mut out = vec![T::zero(); m * n];
        T::gemm(m, k, n, self.value(x).data(), false, self.value(w).data(), false, T::zero(), &mut out);
        let mut shape = xs;
        *shape.last_mut().unwrap() = n;
        let value = Tensor::new(shape, out)?;
        Ok(self.push(value, Op::MatMul { x, w, m, k, n }, &[x, w]))
    }

    /// Bias-free dense layer; alias of [`Graph::matmul`].
    pub fn linear(&mut self, x: Var, w: Var) -> Result<Var> {
        self.matmul(x, w)
    }

    /// Inverted dropout: survivors are scaled by `1 / (1 − rate)` in train
    /// mode; eval mode and `rate == 0` return `x` itself.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, rate: f64, mode: Mode, rng: &mut R) -> Result<Var> {
        check_mode_rate(rate)?;
        if mode == Mode::Eval || rate == 0.0 {
            return Ok(x);
        }
        let keep = T::lit(1.0 / (1.0 - rate));
        let xv = self.value(x);
        let mask: Vec<T> = (0..xv.len())
            .map(|_| if rng.random::<f64>() < rate { T::zero() } else { keep })
            .collect();
        let data = xv.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
        let value = Tensor::new(xv.shape().to_vec(), data)?;
        Ok(self.push(value, Op::Dropout { x, mask }, &[x]))
    }

    /// Mean over the batch of `−Σ_c t_c · log softmax(z)_c` for `[B, C]`
    /// logits and probability-vector targets.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &Tensor<T>) -> Result<Var> {
        let ls = self.shape(logits).to_vec();
        ensure_arg!(ls.len() == 2, "logits must be [B, C], got {ls:?}");
        ensure_arg!(
            targets.shape() == ls.as_slice(),
            "targets shape {:?} does not match logits {ls:?}",
            targets.shape()
        );
        let (batch, classes) = (ls[0], ls[1]);
        let td = targets.data();
        for (b, row) in td.chunks(classes).enumerate() {
            let s: f64 = row.iter().map(|v| v.to_f64().unwrap()).sum();
            ensure_arg!(
                (s - 1.0).abs() <= 1e-6 && row.iter().all(|&v| v >= T::zero()),
                "target row {b} is not a probability distribution (sum {s})"
            );
        }
        let zd = self.value(logits).data();
        let mut probs = vec![T::zero(); zd.len()];
        let mut loss = T::zero();
        for b in 0..batch {
            let z = &zd[b * classes..(b + 1) * classes];
            let t = &td[b * classes..(b + 1) * classes];
            let max = z.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
            let sum_exp: T = z.iter().map(|&v| (v - max).exp()).sum();
            let lse = max + sum_exp.ln();
            for c in 0..classes {
                probs[b * classes + c] = (z[c] - lse).exp();
                if t[c] > T::zero() {
                    loss = loss - t[c] * (z[c] - lse);
                }
            }
        }
        let value = Tensor::scalar(loss / T::from(batch).unwrap());
        let op = Op::SoftmaxCrossEntropy { logits, probs, targets: td.to_vec(), batch };
        Ok(self.push(value, op, &[logits]))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().copied().sum();
        self.push(Tensor::scalar(s), Op::SumAll { x }, &[x])
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let n = T::from(self.value(x).len()).unwrap();
        let s = self.sum(x);
        self.scale(s, T::one() / n)
    }
}

/// Row-wise softmax of a `[B, C]` logit buffer.
pub fn softmax_rows<T: Scalar>(logits: &[T], classes: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(logits.len());
    for z in logits.chunks(classes) {
        let max = z.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
        let e: Vec<T> = z.iter().map(|&v| (v - max).exp()).collect();
        let s: T = e.iter().copied().sum();
        out.extend(e.into_iter().map(|v| v / s));
    }
    out
}
