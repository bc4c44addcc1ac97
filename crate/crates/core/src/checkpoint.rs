//! Model weights and running statistics in the shared container format.

use std::path::Path;

use serde_json::json;

use crate::container::Container;
use crate::error::{LidError, Result};
use crate::models::{ArchConfig, Model};

pub const KIND: &str = "checkpoint";

pub fn to_container(model: &Model<f32>, extra: serde_json::Value) -> Result<Container> {
    let meta = json!({
        "arch": model.arch,
        "config_hash": model.arch.hash(),
        "extra": extra,
    });
    let mut c = Container::new(KIND, meta);
    for t in model.store.named_tensors() {
        c.push(t.name.clone(), t.tensor.shape().to_vec(), t.tensor.data().to_vec())?;
    }
    Ok(c)
}

pub fn save_checkpoint(model: &Model<f32>, extra: serde_json::Value, path: impl AsRef<Path>) -> Result<()> {
    to_container(model, extra)?.save(path)
}

/// Architecture recorded in a checkpoint.
pub fn checkpoint_arch(c: &Container) -> Result<ArchConfig> {
    if c.kind != KIND {
        return Err(LidError::InvalidCheckpoint(format!("container holds {:?}, not a checkpoint", c.kind)));
    }
    serde_json::from_value(c.meta["arch"].clone())
        .map_err(|e| LidError::InvalidCheckpoint(format!("unreadable architecture: {e}")))
}

/// Rebuilds the recorded architecture and loads every tensor. With
/// `expected`, a differing architecture is rejected.
pub fn from_container(c: &Container, expected: Option<&ArchConfig>) -> Result<Model<f32>> {
    let arch = checkpoint_arch(c)?;
    if c.meta["config_hash"].as_str() != Some(arch.hash().as_str()) {
        return Err(LidError::InvalidCheckpoint("config hash does not match the stored architecture".into()));
    }
    if let Some(want) = expected {
        if want.hash() != arch.hash() {
            return Err(LidError::InvalidCheckpoint(format!(
                "checkpoint holds a {} model with a different configuration than the requested {}",
                arch.id(),
                want.id()
            )));
        }
    }
    let mut model = Model::<f32>::seeded(&arch, 0)?;
    let expected_names: Vec<String> = model.store.named_tensors().map(|t| t.name.clone()).collect();
    let stored: Vec<&str> = c.tensors.iter().map(|(e, _)| e.name.as_str()).collect();
    if stored != expected_names.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(LidError::InvalidCheckpoint("tensor names differ from the architecture's layout".into()));
    }
    for (entry, data) in &c.tensors {
        model
            .store
            .load_named(&entry.name, &entry.shape, data)
            .map_err(|e| LidError::InvalidCheckpoint(e.to_string()))?;
    }
    Ok(model)
}

pub fn load_checkpoint(path: impl AsRef<Path>, expected: Option<&ArchConfig>) -> Result<Model<f32>> {
    from_container(&Container::load(path)?, expected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Arch1DConfig;
    use lidf_tensor::Tensor;

    fn tiny() -> ArchConfig {
        ArchConfig::Conv1d(Arch1DConfig { first_layer_filters: 2, input_len: 1200, ..Default::default() })
    }

    #[test]
    fn roundtrip_preserves_predictions() {
        let m = Model::<f32>::seeded(&tiny(), 4).unwrap();
        let c = to_container(&m, json!({"epoch": 3})).unwrap();
        let back = from_container(&Container::from_bytes(&c.to_bytes()).unwrap(), Some(&tiny())).unwrap();
        let x = Tensor::from_fn(vec![2, 1, 1200], |i| (i as f32 * 0.01).sin());
        assert_eq!(m.predict(x.clone()).unwrap(), back.predict(x).unwrap());
    }

    #[test]
    fn architecture_mismatch_rejected() {
        let m = Model::<f32>::seeded(&tiny(), 4).unwrap();
        let c = to_container(&m, json!(null)).unwrap();
        let other = ArchConfig::Conv1d(Arch1DConfig { first_layer_filters: 4, input_len: 1200, ..Default::default() });
        assert!(matches!(from_container(&c, Some(&other)), Err(LidError::InvalidCheckpoint(_))));
    }
}
