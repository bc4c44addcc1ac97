//! Channel gating from pooled channel statistics and spatial gating from a
//! convolution over channel-pooled maps.

use lidf_tensor::{ParamId, ParamStore, Scalar, Var};
use rand::Rng;

use super::layers::{Builder, Fwd};
use crate::error::{LidError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelAttention {
    pub squeeze: ParamId,
    pub excite: ParamId,
}

impl ChannelAttention {
    /// Registers `{name}.squeeze.weight` `[C, C/r]` and `{name}.excite.weight` `[C/r, C]`.
    pub fn register<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        rng: &mut R,
        name: &str,
        channels: usize,
        reduction: usize,
    ) -> Result<Self> {
        Self::build(&mut Builder::new(store, rng), name, channels, reduction)
    }

    pub(crate) fn build<T: Scalar, R: Rng + ?Sized>(
        b: &mut Builder<'_, T, R>,
        name: &str,
        channels: usize,
        reduction: usize,
    ) -> Result<Self> {
        if reduction == 0 || channels % reduction != 0 {
            return Err(LidError::InvalidConfig(format!(
                "{name}: {channels} channels not divisible by reduction {reduction}"
            )));
        }
        let mid = channels / reduction;
        let squeeze = b.linear(&format!("{name}.squeeze"), "Dense", channels, mid, true);
        let excite = b.linear(&format!("{name}.excite"), "Dense", mid, channels, false);
        Ok(Self { squeeze, excite })
    }

    /// Per-channel gate in (0, 1) applied to `x: [B, C, H, W]`.
    pub fn gate<T: Scalar, R: Rng + ?Sized>(&self, f: &mut Fwd<'_, '_, T, R>, x: Var) -> Result<Var> {
        let s = f.g.shape(x).to_vec();
        let pooled = f.g.mean_axes(x, &[2, 3], false)?;
        let z = f.linear(pooled, self.squeeze)?;
        let z = f.g.relu(z);
        let z = f.linear(z, self.excite)?;
        let gate = f.g.sigmoid(z);
        Ok(f.g.reshape(gate, vec![s[0], s[1], 1, 1])?)
    }

    pub fn forward<T: Scalar, R: Rng + ?Sized>(&self, f: &mut Fwd<'_, '_, T, R>, x: Var) -> Result<Var> {
        let gate = self.gate(f, x)?;
        Ok(f.g.mul(x, gate)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpatialAttention {
    pub conv: ParamId,
}

impl SpatialAttention {
    /// Registers `{name}.weight` `[1, 2, k, k]`.
    pub fn register<T: Scalar, R: Rng + ?Sized>(store: &mut ParamStore<T>, rng: &mut R, name: &str, kernel: usize) -> Self {
        Self::build(&mut Builder::new(store, rng), name, kernel)
    }

    pub(crate) fn build<T: Scalar, R: Rng + ?Sized>(b: &mut Builder<'_, T, R>, name: &str, kernel: usize) -> Self {
        Self { conv: b.conv2d(name, "Conv2D", 2, 1, kernel) }
    }

    /// Mask `[B, 1, H, W]` in (0, 1).
    pub fn mask<T: Scalar, R: Rng + ?Sized>(&self, f: &mut Fwd<'_, '_, T, R>, x: Var) -> Result<Var> {
        let mean = f.g.mean_axes(x, &[1], true)?;
        let max = f.g.max_axis(x, 1)?;
        let pooled = f.g.concat(&[mean, max], 1)?;
        let w = f.g.param(self.conv);
        let k = f.g.shape(w)[2];
        let y = f.g.conv2d(pooled, w, (1, 1), (k / 2, k / 2))?;
        Ok(f.g.sigmoid(y))
    }

    pub fn forward<T: Scalar, R: Rng + ?Sized>(&self, f: &mut Fwd<'_, '_, T, R>, x: Var) -> Result<Var> {
        let mask = self.mask(f, x)?;
        Ok(f.g.mul(x, mask)?)
    }
}
