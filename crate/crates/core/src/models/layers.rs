//! Parameter registration and traced forward helpers shared by the networks.

use lidf_tensor::init::{kaiming_normal, xavier_uniform};
use lidf_tensor::{Graph, Mode, ParamId, ParamStore, RunningStats, Scalar, Tensor, Var};
use rand::Rng;

use crate::error::Result;

/// Bookkeeping for one summary row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerInfo {
    pub name: String,
    pub kind: &'static str,
    pub weights: Vec<ParamId>,
    pub norm: Vec<ParamId>,
}

/// Bias-free convolution followed by batch norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvBn {
    pub weight: ParamId,
    pub gamma: ParamId,
    pub beta: ParamId,
    pub stats: RunningStats,
}

pub(crate) struct Builder<'a, T: Scalar, R: Rng + ?Sized> {
    pub store: &'a mut ParamStore<T>,
    pub rng: &'a mut R,
    pub layers: Vec<LayerInfo>,
}

impl<'a, T: Scalar, R: Rng + ?Sized> Builder<'a, T, R> {
    pub fn new(store: &'a mut ParamStore<T>, rng: &'a mut R) -> Self {
        Self { store, rng, layers: Vec::new() }
    }

    fn layer(&mut self, name: &str, kind: &'static str, weights: Vec<ParamId>, norm: Vec<ParamId>) {
        self.layers.push(LayerInfo { name: name.to_string(), kind, weights, norm });
    }

    fn batchnorm(&mut self, name: &str, channels: usize) -> (ParamId, ParamId, RunningStats) {
        let gamma = self.store.add_param(format!("{name}.bn.gamma"), Tensor::ones(vec![channels]));
        let beta = self.store.add_param(format!("{name}.bn.beta"), Tensor::zeros(vec![channels]));
        let mean = self.store.add_buffer(format!("{name}.bn.running_mean"), Tensor::zeros(vec![channels]));
        let var = self.store.add_buffer(format!("{name}.bn.running_var"), Tensor::ones(vec![channels]));
        (gamma, beta, RunningStats { mean, var })
    }

    pub fn conv1d_bn(&mut self, name: &str, cin: usize, cout: usize, k: usize) -> ConvBn {
        let w = kaiming_normal(vec![cout, cin, k], cin * k, self.rng);
        let weight = self.store.add_param(format!("{name}.weight"), w);
        let (gamma, beta, stats) = self.batchnorm(name, cout);
        self.layer(name, "Conv1D", vec![weight], vec![gamma, beta]);
        ConvBn { weight, gamma, beta, stats }
    }

    pub fn conv2d_bn(&mut self, name: &str, cin: usize, cout: usize, k: usize) -> ConvBn {
        let w = kaiming_normal(vec![cout, cin, k, k], cin * k * k, self.rng);
        let weight = self.store.add_param(format!("{name}.weight"), w);
        let (gamma, beta, stats) = self.batchnorm(name, cout);
        self.layer(name, "Conv2D", vec![weight], vec![gamma, beta]);
        ConvBn { weight, gamma, beta, stats }
    }

    pub fn conv2d(&mut self, name: &str, kind: &'static str, cin: usize, cout: usize, k: usize) -> ParamId {
        let w = xavier_uniform(vec![cout, cin, k, k], cin * k * k, cout * k * k, self.rng);
        let weight = self.store.add_param(format!("{name}.weight"), w);
        self.layer(name, kind, vec![weight], vec![]);
        weight
    }

    /// Weight stored `[fan_in, fan_out]`.
    pub fn linear(&mut self, name: &str, kind: &'static str, fin: usize, fout: usize, relu: bool) -> ParamId {
        let w = if relu {
            kaiming_normal(vec![fin, fout], fin, self.rng)
        } else {
            xavier_uniform(vec![fin, fout], fin, fout, self.rng)
        };
        let weight = self.store.add_param(format!("{name}.weight"), w);
        self.layer(name, kind, vec![weight], vec![]);
        weight
    }

    pub fn gru_direction(&mut self, name: &str, feats: usize, hidden: usize) -> (ParamId, ParamId) {
        let wi = xavier_uniform(vec![feats, 3 * hidden], feats, 3 * hidden, self.rng);
        let wh = xavier_uniform(vec![hidden, 3 * hidden], hidden, 3 * hidden, self.rng);
        (
            self.store.add_param(format!("{name}.w_input"), wi),
            self.store.add_param(format!("{name}.w_hidden"), wh),
        )
    }

    pub fn group(&mut self, name: &str, kind: &'static str, weights: Vec<ParamId>) {
        self.layer(name, kind, weights, vec![]);
    }

    /// Parameter-free rows still appear in the summary.
    pub fn marker(&mut self, name: &str, kind: &'static str) {
        self.layer(name, kind, vec![], vec![]);
    }
}

/// Forward-pass state: the tape, train/eval mode, dropout RNG and an
/// optional shape trace keyed by layer name.
pub struct Fwd<'g, 'p, T: Scalar, R: Rng + ?Sized> {
    pub g: &'g mut Graph<'p, T>,
    pub mode: Mode,
    pub rng: &'g mut R,
    pub trace: Option<&'g mut Vec<(String, Vec<usize>)>>,
}

impl<T: Scalar, R: Rng + ?Sized> Fwd<'_, '_, T, R> {
    /// Records the per-example output shape of `name`.
    pub fn record(&mut self, name: &str, v: Var) -> Var {
        if let Some(t) = self.trace.as_deref_mut() {
            t.push((name.to_string(), self.g.shape(v)[1..].to_vec()));
        }
        v
    }

    pub fn bn_relu(&mut self, y: Var, c: &ConvBn) -> Result<Var> {
        let gamma = self.g.param(c.gamma);
        let beta = self.g.param(c.beta);
        let y = self.g.batchnorm(y, gamma, beta, c.stats, self.mode)?;
        Ok(self.g.relu(y))
    }

    pub fn conv1d_bn_relu(&mut self, x: Var, c: &ConvBn, stride: usize) -> Result<Var> {
        let w = self.g.param(c.weight);
        let y = self.g.conv1d(x, w, stride)?;
        self.bn_relu(y, c)
    }

    /// Same-padded convolution and batch norm, before the activation.
    pub fn conv2d_bn(&mut self, x: Var, c: &ConvBn) -> Result<Var> {
        let w = self.g.param(c.weight);
        let k = self.g.shape(w)[2];
        let y = self.g.conv2d(x, w, (1, 1), (k / 2, k / 2))?;
        let gamma = self.g.param(c.gamma);
        let beta = self.g.param(c.beta);
        Ok(self.g.batchnorm(y, gamma, beta, c.stats, self.mode)?)
    }

    pub fn linear(&mut self, x: Var, w: ParamId) -> Result<Var> {
        let w = self.g.param(w);
        Ok(self.g.linear(x, w)?)
    }

    pub fn dropout(&mut self, x: Var, rate: f64) -> Result<Var> {
        Ok(self.g.dropout(x, rate, self.mode, &mut *self.rng)?)
    }
}
