use crate::error::{ensure_arg, Result};
use crate::graph::{GradSink, Graph, Mode, Op, Var};
use crate::scalar::Scalar;
use crate::store::BufferId;
use crate::tensor::Tensor;

pub const BN_EPSILON: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

/// Running statistics of one batch-norm layer. Fresh buffers hold mean 0 and
/// variance 1, so eval mode before any training step is the identity map
/// (up to epsilon) followed by the affine transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunningStats {
    pub mean: BufferId,
    pub var: BufferId,
}

pub(crate) struct BatchNormCtx<T> {
    x: Var,
    gamma: Var,
    beta: Var,
    xhat: Vec<T>,
    inv_std: Vec<T>,
    batch_stats: bool,
    batch: usize,
    channels: usize,
    inner: usize,
}

impl<'p, T: Scalar> Graph<'p, T> {
    /// Per-channel normalization of `[B, C, ...]` over the batch and all
    /// trailing axes, followed by `gamma · x̂ + beta`.
    pub fn batchnorm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        stats: RunningStats,
        mode: Mode,
    ) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        ensure_arg!(xs.len() >= 2, "batchnorm expects [B, C, ...], got {xs:?}");
        let (batch, channels) = (xs[0], xs[1]);
        let inner: usize = xs[2..].iter().product();
        ensure_arg!(
            self.shape(gamma) == [channels] && self.shape(beta) == [channels],
            "batchnorm affine parameters must have shape [{channels}]"
        );
        ensure_arg!(
            self.buffer(stats.mean).len() == channels && self.buffer(stats.var).len() == channels,
            "batchnorm running statistics must have {channels} entries"
        );
        let eps = T::lit(BN_EPSILON);
        let xd = self.value(x).data();
        let n = batch * inner;
        let (mean, var) = if mode == Mode::Train {
            let mut mean = vec![T::zero(); channels];
            let mut var = vec![T::zero(); channels];
            for c in 0..channels {
                let mut acc = T::zero();
                for b in 0..batch {
                    let off = (b * channels + c) * inner;
                    acc = acc + xd[off..off + inner].iter().copied().sum::<T>();
                }
                let m = acc / T::from(n).unwrap();
                let mut sq = T::zero();
                for b in 0..batch {
                    let off = (b * channels + c) * inner;
                    sq = sq + xd[off..off + inner].iter().map(|&v| (v - m) * (v - m)).sum::<T>();
                }
                mean[c] = m;
                var[c] = sq / T::from(n).unwrap();
            }
            (mean, var)
        } else {
            (self.buffer(stats.mean).data().to_vec(), self.buffer(stats.var).data().to_vec())
        };
        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
        let gd = self.value(gamma).data();
        let bd = self.value(beta).data();
        let mut xhat = vec![T::zero(); xd.len()];
        let mut out = vec![T::zero(); xd.len()];
        for b in 0..batch {
            for c in 0..channels {
                let off = (b * channels + c) * inner;
                for i in off..off + inner {
                    let h = (xd[i] - mean[c]) * inv_std[c];
                    xhat[i] = h;
                    out[i] = gd[c] * h + bd[c];
                }
            }
        }
        if mode == Mode::Train {
            let m = T::lit(BN_MOMENTUM);
            let unbias = if n > 1 {
                T::from(n).unwrap() / T::from(n - 1).unwrap()
            } else {
                T::one()
            };
            let rm = self.buffer(stats.mean).data();
            let rv = self.buffer(stats.var).data();
            let new_mean = rm.iter().zip(&mean).map(|(&r, &b)| (T::one() - m) * r + m * b).collect();
            let new_var =
                rv.iter().zip(&var).map(|(&r, &b)| (T::one() - m) * r + m * b * unbias).collect();
            self.record_update(stats.mean, new_mean);
            self.record_update(stats.var, new_var);
        }
        let ctx = BatchNormCtx {
            x,
            gamma,
            beta,
            xhat,
            inv_std,
            batch_stats: mode == Mode::Train,
            batch,
            channels,
            inner,
        };
        let value = Tensor::new(xs, out)?;
        Ok(self.push(value, Op::BatchNorm(Box::new(ctx)), &[x, gamma, beta]))
    }
}

pub(crate) fn batchnorm_backward<T: Scalar>(
    g: &Graph<'_, T>,
    ctx: &BatchNormCtx<T>,
    dy: &[T],
    sink: &mut GradSink<T>,
) {
    let (batch, channels, inner) = (ctx.batch, ctx.channels, ctx.inner);
    let mut sum_dy = vec![T::zero(); channels];
    let mut sum_dy_xhat = vec![T::zero(); channels];
    for b in 0..batch {
        for c in 0..channels {
            let off = (b * channels + c) * inner;
            for i in off..off + inner {
                sum_dy[c] = sum_dy[c] + dy[i];
                sum_dy_xhat[c] = sum_dy_xhat[c] + dy[i] * ctx.xhat[i];
            }
        }
    }
    if let Some(dgamma) = sink.slot(ctx.gamma, channels) {
        for c in 0..channels {
            dgamma[c] = dgamma[c] + sum_dy_xhat[c];
        }
    }
    if let Some(dbeta) = sink.slot(ctx.beta, channels) {
        for c in 0..channels {
            dbeta[c] = dbeta[c] + sum_dy[c];
        }
    }
    let gamma = g.value(ctx.gamma).data();
    let n = T::from(batch * inner).unwrap();
    if let Some(dx) = sink.slot(ctx.x, dy.len()) {
        for b in 0..batch {
            for c in 0..channels {
                let off = (b * channels + c) * inner;
                let k = gamma[c] * ctx.inv_std[c];
                if ctx.batch_stats {
                    let mean_dy = sum_dy[c] / n;
                    let mean_dy_xhat = sum_dy_xhat[c] / n;
                    for i in off..off + inner {
                        dx[i] = dx[i] + k * (dy[i] - mean_dy - ctx.xhat[i] * mean_dy_xhat);
                    }
                } else {
                    for i in off..off + inner {
                        dx[i] = dx[i] + k * dy[i];
                    }
                }
            }
        }
    }
}
