use std::path::{Path, PathBuf};

use lidf_tensor::Tensor;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::container::{hex, Container};
use crate::error::{LidError, Result};

/// How a cached lookup was satisfied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheOutcome {
    Hit,
    Computed,
    /// The entry existed but failed its checksum.
    Recomputed,
}

/// Content hash of the source audio bytes together with the feature config.
pub fn cache_key(audio_bytes: &[u8], config: &impl Serialize) -> String {
    let mut h = Sha256::new();
    h.update(audio_bytes);
    h.update(serde_json::to_vec(config).expect("config serializes"));
    hex(&h.finalize())
}

/// One container file per feature tensor, named by its cache key.
#[derive(Debug, Clone)]
pub struct FeatureCache {
    dir: PathBuf,
}

impl FeatureCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.lidf"))
    }

    /// `Ok(None)` when absent; an error when present but unreadable.
    pub fn get(&self, key: &str) -> Result<Option<Tensor<f32>>> {
        let path = self.path_for(key);
        if !path.exists() {
            return Ok(None);
        }
        let c = Container::load(&path)?;
        let (shape, data) = c.get("feature").ok_or_else(|| LidError::InvalidCheckpoint("no feature tensor".into()))?;
        Ok(Some(Tensor::new(shape.to_vec(), data.to_vec())?))
    }

    pub fn put(&self, key: &str, feature: &Tensor<f32>) -> Result<()> {
        let mut c = Container::new("feature", serde_json::json!({ "key": key }));
        c.push("feature", feature.shape().to_vec(), feature.data().to_vec())?;
        c.save(self.path_for(key))
    }

    pub fn get_or_compute(
        &self,
        key: &str,
        compute: impl FnOnce() -> Result<Tensor<f32>>,
    ) -> Result<(Tensor<f32>, CacheOutcome)> {
        let outcome = match self.get(key) {
            Ok(Some(t)) => return Ok((t, CacheOutcome::Hit)),
            Ok(None) => CacheOutcome::Computed,
            Err(LidError::Io { .. }) | Err(LidError::InvalidCheckpoint(_)) | Err(LidError::Tensor(_)) => {
                log::warn!("cache entry {key} is corrupt; recomputing");
                CacheOutcome::Recomputed
            }
            Err(e) => return Err(e),
        };
        let t = compute()?;
        self.put(key, &t)?;
        Ok((t, outcome))
    }
}
