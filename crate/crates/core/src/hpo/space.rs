use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LidError, Result};
use crate::models::ArchConfig;
use crate::train::TrainConfig;

pub const MAX_DRAWS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Dimension {
    Choice(Vec<f64>),
    Range {
        min: f64,
        max: f64,
        #[serde(default)]
        log: bool,
    },
}

impl Dimension {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Dimension::Choice(values) => values[rng.random_range(0..values.len())],
            Dimension::Range { min, max, log: false } => rng.random_range(*min..=*max),
            Dimension::Range { min, max, log: true } => rng.random_range(min.ln()..=max.ln()).exp(),
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        let ok = match self {
            Dimension::Choice(v) => !v.is_empty() && v.iter().all(|x| x.is_finite()),
            Dimension::Range { min, max, log } => min.is_finite() && max.is_finite() && min <= max && (!log || *min > 0.0),
        };
        if ok {
            Ok(())
        } else {
            Err(LidError::InvalidConfig(format!("search dimension `{name}` is empty or malformed")))
        }
    }
}

/// Dimension names understood by [`apply`].
pub const KNOWN_DIMENSIONS: [&str; 11] = [
    "filters",
    "kernel",
    "dropout",
    "batch",
    "block1_layers",
    "block2_layers",
    "gru_hidden",
    "embedding_dim",
    "dense_units",
    "image",
    "lr",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpace {
    pub arch: String,
    pub dimensions: BTreeMap<String, Dimension>,
}

fn choice(values: &[f64]) -> Dimension {
    Dimension::Choice(values.to_vec())
}

impl SearchSpace {
    pub fn default_for(arch: &str) -> Result<Self> {
        let mut d = BTreeMap::new();
        d.insert("filters".into(), choice(&[32.0, 64.0, 128.0]));
        d.insert("batch".into(), choice(&[32.0, 64.0, 128.0]));
        match arch {
            "1d" => {
                d.insert("kernel".into(), choice(&[3.0, 5.0, 7.0, 9.0]));
                d.insert("dropout".into(), choice(&[0.05, 0.1, 0.25, 0.5]));
                d.insert("block1_layers".into(), choice(&[1.0, 2.0, 3.0]));
                d.insert("block2_layers".into(), choice(&[1.0, 2.0, 3.0]));
            }
            "2d" | "2d-attn-gru" => {
                d.insert("kernel".into(), choice(&[3.0, 7.0]));
                d.insert("dropout".into(), choice(&[0.05, 0.1, 0.25]));
                d.insert("image".into(), choice(&[64.0, 128.0]));
                if arch == "2d-attn-gru" {
                    d.insert("gru_hidden".into(), choice(&[256.0, 768.0, 1536.0]));
                }
            }
            other => return Err(LidError::InvalidConfig(format!("unknown architecture `{other}`"))),
        }
        Ok(Self { arch: arch.to_string(), dimensions: d })
    }

    pub fn validate(&self) -> Result<()> {
        ArchConfig::preset(&self.arch)?;
        if self.dimensions.is_empty() {
            return Err(LidError::InvalidConfig("search space has no dimensions".into()));
        }
        for (name, dim) in &self.dimensions {
            if !KNOWN_DIMENSIONS.contains(&name.as_str()) {
                return Err(LidError::InvalidConfig(format!(
                    "unknown search dimension `{name}`; expected one of {KNOWN_DIMENSIONS:?}"
                )));
            }
            dim.validate(name)?;
        }
        Ok(())
    }
}

fn as_count(name: &str, v: f64) -> Result<usize> {
    if v >= 1.0 && v.fract() == 0.0 && v < u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(LidError::InvalidConfig(format!("`{name}` must be a positive integer, got {v}")))
    }
}

/// Writes one sampled value into `config`.
pub fn apply(config: &mut TrainConfig, name: &str, v: f64) -> Result<()> {
    let arch = config.model.id();
    let unsupported = || LidError::InvalidConfig(format!("dimension `{name}` does not apply to {arch}"));
    match name {
        "batch" => config.batch_size = as_count(name, v)?,
        "lr" => config.optimizer.lr = v,
        _ => match &mut config.model {
            ArchConfig::Conv1d(c) => match name {
                "filters" => c.first_layer_filters = as_count(name, v)?,
                "kernel" => c.kernel_size = as_count(name, v)?,
                "dropout" => c.dropout_rate = v,
                "block1_layers" => c.block1_layers = as_count(name, v)?,
                "block2_layers" => c.block2_layers = as_count(name, v)?,
                _ => return Err(unsupported()),
            },
            ArchConfig::Conv2d(c) | ArchConfig::AttnGru(crate::models::AttnGruConfig { base: c, .. }) => match name {
                "filters" => c.first_layer_filters = as_count(name, v)?,
                "kernel" => c.kernel_size = as_count(name, v)?,
                "dropout" => c.dropout_rates = (v, v),
                "image" => c.image_size = as_count(name, v)?,
                "gru_hidden" => c.gru_hidden_per_direction = as_count(name, v)?,
                "embedding_dim" => c.embedding_dim = as_count(name, v)?,
                "dense_units" => c.dense_units = as_count(name, v)?,
                _ => return Err(unsupported()),
            },
        },
    }
    Ok(())
}

pub type Choices = BTreeMap<String, f64>;

/// Uniform draw per dimension on top of `base`, redrawing configurations the
/// model cannot be built for.
pub fn sample_config<R: Rng + ?Sized>(space: &SearchSpace, base: &TrainConfig, rng: &mut R) -> Result<(TrainConfig, Choices)> {
    space.validate()?;
    let mut last = String::new();
    for _ in 0..MAX_DRAWS {
        let mut config = base.clone();
        if config.model.id() != space.arch {
            let n = config.model.num_classes();
            config.model = ArchConfig::preset(&space.arch)?;
            config.model.set_num_classes(n);
        }
        let mut choices = Choices::new();
        for (name, dim) in &space.dimensions {
            let v = dim.sample(rng);
            choices.insert(name.clone(), v);
            apply(&mut config, name, v)?;
        }
        config.sync_image_size();
        match config.model.validate().and_then(|_| config.optimizer.validate()) {
            Ok(()) => return Ok((config, choices)),
            Err(e) => last = e.to_string(),
        }
    }
    Err(LidError::InfeasibleSpace(format!("{MAX_DRAWS} consecutive draws were infeasible; last: {last}")))
}
