//! Raw-waveform 1D ConvNet.

use lidf_tensor::{conv_out_len, ParamId, ParamStore, Scalar, Var};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{Builder, ConvBn, Fwd, LayerInfo};
use crate::audio::CLIP_LEN;
use crate::error::{LidError, Result};

pub const POOL: usize = 3;
pub const STEM_STRIDE: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Arch1DConfig {
    pub first_layer_filters: usize,
    pub kernel_size: usize,
    pub dropout_rate: f64,
    pub block1_layers: usize,
    pub block2_layers: usize,
    pub num_classes: usize,
    pub input_len: usize,
}

impl Default for Arch1DConfig {
    fn default() -> Self {
        Self {
            first_layer_filters: 128,
            kernel_size: 3,
            dropout_rate: 0.1,
            block1_layers: 2,
            block2_layers: 1,
            num_classes: 6,
            input_len: CLIP_LEN,
        }
    }
}

impl Arch1DConfig {
    /// Channel widths of the stem, first block, middle conv, second block and top conv.
    pub fn widths(&self) -> [usize; 5] {
        let f = self.first_layer_filters;
        [f, f, 2 * f, 2 * f, 4 * f]
    }

    /// Temporal extent after each layer, failing on the first that underflows.
    pub fn extents(&self) -> Result<Vec<(String, usize)>> {
        let k = self.kernel_size;
        let mut out = Vec::new();
        let mut len = self.input_len;
        let mut step = |name: String, kernel: usize, stride: usize, len: &mut usize| -> Result<()> {
            *len = conv_out_len(*len, kernel, stride, 0).ok_or_else(|| {
                LidError::InvalidConfig(format!("layer {name}: temporal extent {len} is shorter than window {kernel}"))
            })?;
            out.push((name, *len));
            Ok(())
        };
        step("conv1".into(), k, STEM_STRIDE, &mut len)?;
        for i in 1..=self.block1_layers {
            step(format!("block1.conv{i}"), k, 1, &mut len)?;
            step(format!("block1.pool{i}"), POOL, POOL, &mut len)?;
        }
        step("conv2".into(), k, 1, &mut len)?;
        step("conv2.pool".into(), POOL, POOL, &mut len)?;
        for i in 1..=self.block2_layers {
            step(format!("block2.conv{i}"), k, 1, &mut len)?;
            step(format!("block2.pool{i}"), POOL, POOL, &mut len)?;
        }
        step("conv3".into(), k, 1, &mut len)?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(LidError::InvalidConfig(m));
        if self.first_layer_filters == 0 || self.kernel_size == 0 || self.num_classes < 2 {
            return bad(format!("1d model needs positive filters/kernel and >= 2 classes: {self:?}"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout_rate {} outside [0, 1)", self.dropout_rate));
        }
        self.extents().map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Net1d {
    pub config: Arch1DConfig,
    stem: ConvBn,
    block1: Vec<ConvBn>,
    mid: ConvBn,
    block2: Vec<ConvBn>,
    top: ConvBn,
    dense: ParamId,
}

impl Net1d {
    pub(crate) fn build<T: Scalar, R: Rng + ?Sized>(
        config: &Arch1DConfig,
        store: &mut ParamStore<T>,
        rng: &mut R,
    ) -> Result<(Self, Vec<LayerInfo>)> {
        config.validate()?;
        let [w0, w1, w2, w3, w4] = config.widths();
        let k = config.kernel_size;
        let mut b = Builder::new(store, rng);
        let stem = b.conv1d_bn("conv1", 1, w0, k);
        let mut block1 = Vec::new();
        let mut cin = w0;
        for i in 1..=config.block1_layers {
            block1.push(b.conv1d_bn(&format!("block1.conv{i}"), cin, w1, k));
            b.marker(&format!("block1.pool{i}"), "MaxPool1D");
            cin = w1;
        }
        let mid = b.conv1d_bn("conv2", cin, w2, k);
        b.marker("conv2.pool", "MaxPool1D");
        let mut block2 = Vec::new();
        cin = w2;
        for i in 1..=config.block2_layers {
            block2.push(b.conv1d_bn(&format!("block2.conv{i}"), cin, w3, k));
            b.marker(&format!("block2.pool{i}"), "MaxPool1D");
            cin = w3;
        }
        let top = b.conv1d_bn("conv3", cin, w4, k);
        b.marker("global_max_pool", "GlobalMaxPool1D");
        b.marker("dropout", "Dropout");
        let dense = b.linear("dense", "Dense", w4, config.num_classes, false);
        let layers = b.layers;
        Ok((Self { config: config.clone(), stem, block1, mid, block2, top, dense }, layers))
    }

    /// `x: [B, 1, L]` → logits `[B, C]`.
    pub fn forward<T: Scalar, R: Rng + ?Sized>(&self, f: &mut Fwd<'_, '_, T, R>, x: Var) -> Result<Var> {
        let mut h = f.conv1d_bn_relu(x, &self.stem, STEM_STRIDE)?;
        f.record("conv1", h);
        for (i, c) in self.block1.iter().enumerate() {
            h = f.conv1d_bn_relu(h, c, 1)?;
            f.record(&format!("block1.conv{}", i + 1), h);
            h = f.g.maxpool1d(h, POOL, POOL)?;
            f.record(&format!("block1.pool{}", i + 1), h);
        }
        h = f.conv1d_bn_relu(h, &self.mid, 1)?;
        f.record("conv2", h);
        h = f.g.maxpool1d(h, POOL, POOL)?;
        f.record("conv2.pool", h);
        for (i, c) in self.block2.iter().enumerate() {
            h = f.conv1d_bn_relu(h, c, 1)?;
            f.record(&format!("block2.conv{}", i + 1), h);
            h = f.g.maxpool1d(h, POOL, POOL)?;
            f.record(&format!("block2.pool{}", i + 1), h);
        }
        h = f.conv1d_bn_relu(h, &self.top, 1)?;
        f.record("conv3", h);
        h = f.g.global_maxpool1d(h)?;
        let (b, c) = (f.g.shape(h)[0], f.g.shape(h)[1]);
        h = f.g.reshape(h, vec![b, c])?;
        f.record("global_max_pool", h);
        h = f.dropout(h, self.config.dropout_rate)?;
        f.record("dropout", h);
        let y = f.linear(h, self.dense)?;
        Ok(f.record("dense", y))
    }
}
