use lidf_tensor::{Adam, Optimizer, Sgd};
use serde::{Deserialize, Serialize};

use crate::augment::MixupConfig;
use crate::dataset::DEFAULT_K;
use crate::error::{LidError, Result};
use crate::features::MelConfig;
use crate::models::{ArchConfig, InputKind};

pub const BATCH_SIZES: [usize; 3] = [32, 64, 128];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    /// SGD only.
    pub momentum: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { kind: OptimizerKind::Adam, lr: 1e-3, momentum: 0.0, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl OptimizerConfig {
    pub fn sgd(lr: f64) -> Self {
        Self { kind: OptimizerKind::Sgd, lr, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(LidError::InvalidConfig(format!("optimizer.lr must be positive, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.momentum) || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(LidError::InvalidConfig("optimizer momentum and betas must lie in [0, 1)".into()));
        }
        Ok(())
    }

    pub fn build(&self) -> Box<dyn Optimizer<f32> + Send> {
        match self.kind {
            OptimizerKind::Adam => {
                Box::new(Adam::new(self.lr as f32, self.beta1 as f32, self.beta2 as f32, self.eps as f32))
            }
            OptimizerKind::Sgd => Box::new(Sgd::new(self.lr as f32, self.momentum as f32)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FoldConfig {
    pub k: usize,
    pub seed: u64,
}

impl Default for FoldConfig {
    fn default() -> Self {
        Self { k: DEFAULT_K, seed: 0 }
    }
}

/// Everything a cross-validated training run depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Threads for feature extraction and for folds trained side by side.
    pub workers: usize,
    pub model: ArchConfig,
    pub optimizer: OptimizerConfig,
    pub mixup: MixupConfig,
    pub folds: FoldConfig,
    pub features: MelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            epochs: 50,
            batch_size: 32,
            workers: 1,
            model: ArchConfig::preset("1d").expect("built-in preset"),
            optimizer: OptimizerConfig::default(),
            mixup: MixupConfig::default(),
            folds: FoldConfig::default(),
            features: MelConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn for_arch(arch: ArchConfig) -> Self {
        let mut c = Self { model: arch, ..Default::default() };
        c.sync_image_size();
        c
    }

    /// Copies the model's image size into the feature config.
    pub fn sync_image_size(&mut self) {
        if let InputKind::Image { size } = self.model.input() {
            self.features.image_size = size;
        }
    }

    /// Whether mixup is applied to this architecture's training batches.
    pub fn mixup_active(&self) -> bool {
        self.mixup.enabled && (matches!(self.model.input(), InputKind::Image { .. }) || self.mixup.waveform)
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(LidError::InvalidConfig("batch_size must be positive".into()));
        }
        if !BATCH_SIZES.contains(&self.batch_size) {
            log::warn!("batch_size {} is outside the usual {BATCH_SIZES:?}", self.batch_size);
        }
        if self.workers == 0 {
            return Err(LidError::InvalidConfig("workers must be at least 1".into()));
        }
        if self.folds.k < 2 {
            return Err(LidError::InvalidConfig(format!("folds.k must be at least 2, got {}", self.folds.k)));
        }
        self.model.validate()?;
        self.optimizer.validate()?;
        self.mixup.validate()?;
        if let InputKind::Image { size } = self.model.input() {
            if size != self.features.image_size {
                return Err(LidError::InvalidConfig(format!(
                    "model expects {size}x{size} images but features.image_size is {}",
                    self.features.image_size
                )));
            }
        }
        if self.mixup.enabled && !self.mixup_active() {
            log::warn!("mixup is enabled but ignored for waveform input; set mixup.waveform to apply it");
        }
        Ok(())
    }
}
