//! The three classifier architectures, built from configuration into a
//! parameter store plus a forward function.

mod attention;
mod conv1d;
mod conv2d;
mod layers;
mod summary;

pub use attention::{ChannelAttention, SpatialAttention};
pub use conv1d::{Arch1DConfig, Net1d};
pub use conv2d::{Arch2DConfig, Extras2D, Net2d};
pub use layers::{Fwd, LayerInfo};
pub use summary::{Summary, SummaryRow};

use lidf_tensor::{Graph, Mode, ParamStore, Scalar, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LidError, Result};

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttnGruConfig {
    #[serde(flatten)]
    pub base: Arch2DConfig,
    #[serde(default = "yes")]
    pub use_attention: bool,
    #[serde(default = "yes")]
    pub use_gru: bool,
    #[serde(default = "yes")]
    pub use_residual: bool,
}

impl Default for AttnGruConfig {
    fn default() -> Self {
        Self { base: Arch2DConfig::default(), use_attention: true, use_gru: true, use_residual: true }
    }
}

impl AttnGruConfig {
    pub fn extras(&self) -> Extras2D {
        Extras2D { use_attention: self.use_attention, use_gru: self.use_gru, use_residual: self.use_residual }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "arch")]
pub enum ArchConfig {
    #[serde(rename = "1d")]
    Conv1d(Arch1DConfig),
    #[serde(rename = "2d")]
    Conv2d(Arch2DConfig),
    #[serde(rename = "2d-attn-gru")]
    AttnGru(AttnGruConfig),
}

/// What a model consumes per example.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputKind {
    Waveform { len: usize },
    Image { size: usize },
}

impl ArchConfig {
    pub const IDS: [&'static str; 3] = ["1d", "2d", "2d-attn-gru"];

    pub fn preset(id: &str) -> Result<Self> {
        match id {
            "1d" => Ok(Self::Conv1d(Arch1DConfig::default())),
            "2d" => Ok(Self::Conv2d(Arch2DConfig::default())),
            "2d-attn-gru" => Ok(Self::AttnGru(AttnGruConfig::default())),
            other => Err(LidError::InvalidConfig(format!(
                "unknown architecture {other:?}; expected one of {:?}",
                Self::IDS
            ))),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            Self::Conv1d(_) => "1d",
            Self::Conv2d(_) => "2d",
            Self::AttnGru(_) => "2d-attn-gru",
        }
    }

    pub fn num_classes(&self) -> usize {
        match self {
            Self::Conv1d(c) => c.num_classes,
            Self::Conv2d(c) => c.num_classes,
            Self::AttnGru(c) => c.base.num_classes,
        }
    }

    pub fn set_num_classes(&mut self, n: usize) {
        match self {
            Self::Conv1d(c) => c.num_classes = n,
            Self::Conv2d(c) => c.num_classes = n,
            Self::AttnGru(c) => c.base.num_classes = n,
        }
    }

    pub fn input(&self) -> InputKind {
        match self {
            Self::Conv1d(c) => InputKind::Waveform { len: c.input_len },
            Self::Conv2d(c) => InputKind::Image { size: c.image_size },
            Self::AttnGru(c) => InputKind::Image { size: c.base.image_size },
        }
    }

    /// Per-example input shape.
    pub fn input_shape(&self) -> Vec<usize> {
        match self.input() {
            InputKind::Waveform { len } => vec![1, len],
            InputKind::Image { size } => vec![conv2d::IN_CHANNELS, size, size],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Conv1d(c) => c.validate(),
            Self::Conv2d(c) => c.validate(Extras2D::NONE),
            Self::AttnGru(c) => c.base.validate(c.extras()),
        }
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        crate::container::sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Network {
    Conv1d(Net1d),
    Conv2d(Net2d),
}

impl Network {
    pub fn forward<T: Scalar, R: Rng + ?Sized>(&self, f: &mut Fwd<'_, '_, T, R>, x: Var) -> Result<Var> {
        match self {
            Network::Conv1d(n) => n.forward(f, x),
            Network::Conv2d(n) => n.forward(f, x),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Model<T: Scalar> {
    pub arch: ArchConfig,
    pub net: Network,
    pub store: ParamStore<T>,
    pub layers: Vec<LayerInfo>,
}

impl<T: Scalar> Model<T> {
    pub fn new<R: Rng + ?Sized>(arch: &ArchConfig, rng: &mut R) -> Result<Self> {
        let mut store = ParamStore::new();
        let (net, layers) = match arch {
            ArchConfig::Conv1d(c) => {
                let (n, l) = Net1d::build(c, &mut store, rng)?;
                (Network::Conv1d(n), l)
            }
            ArchConfig::Conv2d(c) => {
                let (n, l) = Net2d::build(c, Extras2D::NONE, &mut store, rng)?;
                (Network::Conv2d(n), l)
            }
            ArchConfig::AttnGru(c) => {
                let (n, l) = Net2d::build(&c.base, c.extras(), &mut store, rng)?;
                (Network::Conv2d(n), l)
            }
        };
        Ok(Self { arch: arch.clone(), net, store, layers })
    }

    /// Builds with weights drawn from a ChaCha stream seeded by `seed`.
    pub fn seeded(arch: &ArchConfig, seed: u64) -> Result<Self> {
        Self::new(arch, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    /// Logits `[B, C]` for a batched input `x`.
    pub fn forward<R: Rng + ?Sized>(&self, g: &mut Graph<'_, T>, x: Var, mode: Mode, rng: &mut R) -> Result<Var> {
        self.run(&mut Fwd { g, mode, rng, trace: None }, x)
    }

    pub fn run<R: Rng + ?Sized>(&self, f: &mut Fwd<'_, '_, T, R>, x: Var) -> Result<Var> {
        let want = self.arch.input_shape();
        let got = f.g.shape(x);
        if got.len() != want.len() + 1 || got[1..] != want[..] {
            return Err(LidError::InvalidArgument(format!(
                "{} model expects [B, {want:?}], got {got:?}",
                self.arch.id()
            )));
        }
        self.net.forward(f, x)
    }

    /// Eval-mode logits for a batch, without recording gradients.
    pub fn predict(&self, x: Tensor<T>) -> Result<Tensor<T>> {
        let mut g = Graph::new(&self.store);
        let xv = g.input(x);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let y = self.forward(&mut g, xv, Mode::Eval, &mut rng)?;
        Ok(g.value(y).clone())
    }

    /// Layer table from one traced eval-mode pass on a zero example.
    pub fn summarize(&self) -> Result<Summary> {
        let mut shape = vec![1];
        shape.extend(self.arch.input_shape());
        let mut g = Graph::new(&self.store);
        let x = g.input(Tensor::zeros(shape));
        let mut trace = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        self.run(&mut Fwd { g: &mut g, mode: Mode::Eval, rng: &mut rng, trace: Some(&mut trace) }, x)?;
        Ok(Summary::new(self.arch.id(), &self.store, &self.layers, &trace))
    }
}

pub fn build_1d_convnet(config: &Arch1DConfig, seed: u64) -> Result<Model<f32>> {
    Model::seeded(&ArchConfig::Conv1d(config.clone()), seed)
}

pub fn build_2d_convnet(config: &Arch2DConfig, seed: u64) -> Result<Model<f32>> {
    Model::seeded(&ArchConfig::Conv2d(config.clone()), seed)
}

pub fn build_2d_attn_gru(config: &AttnGruConfig, seed: u64) -> Result<Model<f32>> {
    Model::seeded(&ArchConfig::AttnGru(config.clone()), seed)
}
