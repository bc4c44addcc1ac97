//! Log-Mel image models: the plain 2D ConvNet and the residual trunk with
//! channel/spatial attention and a bidirectional GRU.

use lidf_tensor::{GruWeights, ParamId, ParamStore, Scalar, Var};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::attention::{ChannelAttention, SpatialAttention};
use super::layers::{Builder, ConvBn, Fwd, LayerInfo};
use crate::error::{LidError, Result};

pub const NUM_BLOCKS: usize = 4;
pub const IN_CHANNELS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Arch2DConfig {
    pub first_layer_filters: usize,
    pub kernel_size: usize,
    /// Before the hidden dense layer and before the output layer.
    pub dropout_rates: (f64, f64),
    pub gru_hidden_per_direction: usize,
    pub embedding_dim: usize,
    pub dense_units: usize,
    pub image_size: usize,
    pub attention_reduction: usize,
    pub spatial_kernel: usize,
    pub num_classes: usize,
}

impl Default for Arch2DConfig {
    fn default() -> Self {
        Self {
            first_layer_filters: 64,
            kernel_size: 3,
            dropout_rates: (0.2, 0.1),
            gru_hidden_per_direction: 768,
            embedding_dim: 768,
            dense_units: 256,
            image_size: 128,
            attention_reduction: 16,
            spatial_kernel: 7,
            num_classes: 6,
        }
    }
}

/// Optional components layered on the plain trunk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Extras2D {
    pub use_attention: bool,
    pub use_gru: bool,
    pub use_residual: bool,
}

impl Extras2D {
    pub const NONE: Self = Self { use_attention: false, use_gru: false, use_residual: false };
    pub const ALL: Self = Self { use_attention: true, use_gru: true, use_residual: true };
}

impl Arch2DConfig {
    pub fn widths(&self) -> [usize; NUM_BLOCKS] {
        let f = self.first_layer_filters;
        [f, 2 * f, 4 * f, 8 * f]
    }

    /// Spatial side after the final pooling stage.
    pub fn final_side(&self) -> usize {
        self.image_size >> NUM_BLOCKS
    }

    pub fn validate(&self, extras: Extras2D) -> Result<()> {
        let bad = |m: String| Err(LidError::InvalidConfig(m));
        if self.first_layer_filters == 0 || self.num_classes < 2 || self.dense_units == 0 {
            return bad(format!("2d model needs positive widths and >= 2 classes: {self:?}"));
        }
        if self.kernel_size % 2 == 0 {
            return bad(format!("kernel_size {} must be odd for same padding", self.kernel_size));
        }
        for (i, r) in [self.dropout_rates.0, self.dropout_rates.1].into_iter().enumerate() {
            if !(0.0..1.0).contains(&r) {
                return bad(format!("dropout_rates.{i} = {r} outside [0, 1)"));
            }
        }
        let mut side = self.image_size;
        for b in 1..=NUM_BLOCKS {
            if side < 2 || side % 2 != 0 {
                return bad(format!("layer block{b}.pool: spatial extent {side} cannot be halved"));
            }
            side /= 2;
        }
        let c = self.widths()[NUM_BLOCKS - 1];
        if extras.use_attention {
            if self.attention_reduction == 0 || c % self.attention_reduction != 0 {
                return bad(format!("channel attention: {c} channels not divisible by reduction {}", self.attention_reduction));
            }
            if self.spatial_kernel % 2 == 0 {
                return bad(format!("spatial_kernel {} must be odd", self.spatial_kernel));
            }
        }
        if extras.use_gru && (self.gru_hidden_per_direction == 0 || self.embedding_dim == 0) {
            return bad("GRU hidden size and embedding dim must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Block {
    convs: [ConvBn; 2],
    /// 1×1 projection for each conv whose input and output channels differ.
    skips: [Option<ParamId>; 2],
}

#[derive(Debug, Clone, PartialEq)]
struct Recurrent {
    fwd: (ParamId, ParamId),
    bwd: (ParamId, ParamId),
    embed: ParamId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Net2d {
    pub config: Arch2DConfig,
    pub extras: Extras2D,
    blocks: Vec<Block>,
    channel: Option<ChannelAttention>,
    spatial: Option<SpatialAttention>,
    gru: Option<Recurrent>,
    hidden: ParamId,
    out: ParamId,
}

impl Net2d {
    pub(crate) fn build<T: Scalar, R: Rng + ?Sized>(
        config: &Arch2DConfig,
        extras: Extras2D,
        store: &mut ParamStore<T>,
        rng: &mut R,
    ) -> Result<(Self, Vec<LayerInfo>)> {
        config.validate(extras)?;
        let k = config.kernel_size;
        let mut b = Builder::new(store, rng);
        let mut blocks = Vec::new();
        let mut cin = IN_CHANNELS;
        for (i, &w) in config.widths().iter().enumerate() {
            let mut convs = Vec::new();
            let mut skips = [None, None];
            for j in 0..2 {
                let name = format!("block{}.conv{}", i + 1, j + 1);
                convs.push(b.conv2d_bn(&name, cin, w, k));
                if extras.use_residual && cin != w {
                    skips[j] = Some(b.conv2d(&format!("{name}.skip"), "Conv2D 1x1", cin, w, 1));
                }
                cin = w;
            }
            b.marker(&format!("block{}.pool", i + 1), "AvgPool2D");
            blocks.push(Block { convs: [convs[0], convs[1]], skips });
        }
        let (channel, spatial) = if extras.use_attention {
            (
                Some(ChannelAttention::build(&mut b, "channel_attention", cin, config.attention_reduction)?),
                Some(SpatialAttention::build(&mut b, "spatial_attention", config.spatial_kernel)),
            )
        } else {
            (None, None)
        };
        let side = config.final_side();
        let head_in;
        let gru = if extras.use_gru {
            let h = config.gru_hidden_per_direction;
            let feats = cin * side;
            let fwd = b.gru_direction("bigru.fwd", feats, h);
            let bwd = b.gru_direction("bigru.bwd", feats, h);
            b.group("bigru", "BiGRU", vec![fwd.0, fwd.1, bwd.0, bwd.1]);
            let embed = b.linear("embedding", "Dense", 2 * h, config.embedding_dim, false);
            b.marker("temporal_mean", "MeanPool");
            head_in = config.embedding_dim;
            Some(Recurrent { fwd, bwd, embed })
        } else {
            b.marker("flatten", "Flatten");
            head_in = cin * side * side;
            None
        };
        b.marker("dropout1", "Dropout");
        let hidden = b.linear("dense", "Dense", head_in, config.dense_units, true);
        b.marker("dropout2", "Dropout");
        let out = b.linear("logits", "Dense", config.dense_units, config.num_classes, false);
        let layers = b.layers;
        Ok((Self { config: config.clone(), extras, blocks, channel, spatial, gru, hidden, out }, layers))
    }

    /// `x: [B, 3, S, S]` → logits `[B, C]`.
    pub fn forward<T: Scalar, R: Rng + ?Sized>(&self, f: &mut Fwd<'_, '_, T, R>, x: Var) -> Result<Var> {
        let mut h = x;
        for (i, block) in self.blocks.iter().enumerate() {
            for j in 0..2 {
                let name = format!("block{}.conv{}", i + 1, j + 1);
                let y = f.conv2d_bn(h, &block.convs[j])?;
                let y = if self.extras.use_residual {
                    let skip = match block.skips[j] {
                        Some(p) => {
                            let w = f.g.param(p);
                            let s = f.g.conv2d(h, w, (1, 1), (0, 0))?;
                            f.record(&format!("{name}.skip"), s)
                        }
                        None => h,
                    };
                    f.g.add(y, skip)?
                } else {
                    y
                };
                h = f.g.relu(y);
                f.record(&name, h);
            }
            h = f.g.avgpool2d(h, (2, 2), (2, 2))?;
            f.record(&format!("block{}.pool", i + 1), h);
        }
        if let (Some(ca), Some(sa)) = (&self.channel, &self.spatial) {
            h = ca.forward(f, h)?;
            f.record("channel_attention", h);
            h = sa.forward(f, h)?;
            f.record("spatial_attention", h);
        }
        let b = f.g.shape(h)[0];
        h = if let Some(r) = &self.gru {
            // [B, C, H, W] → [B, W, C·H]: image columns become time steps.
            let s = f.g.shape(h).to_vec();
            let seq = f.g.permute(h, &[0, 3, 1, 2])?;
            let seq = f.g.reshape(seq, vec![b, s[3], s[1] * s[2]])?;
            let (fw, bw) = (self.gru_weights(f, r.fwd), self.gru_weights(f, r.bwd));
            let y = f.g.bigru(seq, fw, bw, self.config.gru_hidden_per_direction)?;
            f.record("bigru", y);
            let e = f.linear(y, r.embed)?;
            f.record("embedding", e);
            let m = f.g.mean_axes(e, &[1], false)?;
            f.record("temporal_mean", m)
        } else {
            let n: usize = f.g.shape(h)[1..].iter().product();
            let flat = f.g.reshape(h, vec![b, n])?;
            f.record("flatten", flat)
        };
        h = f.dropout(h, self.config.dropout_rates.0)?;
        f.record("dropout1", h);
        h = f.linear(h, self.hidden)?;
        h = f.g.relu(h);
        f.record("dense", h);
        h = f.dropout(h, self.config.dropout_rates.1)?;
        f.record("dropout2", h);
        let y = f.linear(h, self.out)?;
        Ok(f.record("logits", y))
    }

    fn gru_weights<T: Scalar, R: Rng + ?Sized>(&self, f: &mut Fwd<'_, '_, T, R>, p: (ParamId, ParamId)) -> GruWeights {
        GruWeights { w_input: f.g.param(p.0), w_hidden: f.g.param(p.1) }
    }
}
