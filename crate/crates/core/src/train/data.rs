use std::fs;

use lidf_tensor::Tensor;
use serde::Serialize;

use crate::audio::{load_prepared, prepare, read_wav_bytes};
use crate::dataset::Manifest;
use crate::error::{LidError, Result};
use crate::features::{cache_key, mel_image, CacheOutcome, FeatureCache, MelConfig};
use crate::models::{ArchConfig, InputKind};

/// Model inputs for every manifest entry, held in memory.
#[derive(Debug, Clone)]
pub struct FeatureSet {
    pub inputs: Vec<Tensor<f32>>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl FeatureSet {
    pub fn new(inputs: Vec<Tensor<f32>>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if inputs.len() != labels.len() {
            return Err(LidError::InvalidArgument(format!("{} inputs but {} labels", inputs.len(), labels.len())));
        }
        if let Some(first) = inputs.first() {
            if let Some(bad) = inputs.iter().find(|t| t.shape() != first.shape()) {
                return Err(LidError::InvalidArgument(format!(
                    "inputs disagree in shape: {:?} vs {:?}",
                    first.shape(),
                    bad.shape()
                )));
            }
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(LidError::InvalidArgument(format!("label {l} out of range for {num_classes} classes")));
        }
        Ok(Self { inputs, labels, num_classes })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Stacked inputs `[B, ..]` and one-hot targets `[B, C]`.
    pub fn batch(&self, indices: &[usize]) -> Result<(Tensor<f32>, Tensor<f32>)> {
        let first = self
            .inputs
            .get(*indices.first().ok_or_else(|| LidError::InvalidArgument("empty batch".into()))?)
            .ok_or_else(|| LidError::InvalidArgument("batch index out of range".into()))?;
        let mut shape = vec![indices.len()];
        shape.extend_from_slice(first.shape());
        let mut data = Vec::with_capacity(indices.len() * first.len());
        let mut targets = vec![0.0f32; indices.len() * self.num_classes];
        for (row, &i) in indices.iter().enumerate() {
            let x = self.inputs.get(i).ok_or_else(|| LidError::InvalidArgument(format!("index {i} out of range")))?;
            data.extend_from_slice(x.data());
            targets[row * self.num_classes + self.labels[i]] = 1.0;
        }
        Ok((Tensor::new(shape, data)?, Tensor::new(vec![indices.len(), self.num_classes], targets)?))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LoadStats {
    pub hits: usize,
    pub computed: usize,
    pub recomputed: usize,
}

fn load_one(
    path: &std::path::Path,
    arch: &ArchConfig,
    mel: &MelConfig,
    cache: Option<&FeatureCache>,
) -> Result<(Tensor<f32>, Option<CacheOutcome>)> {
    match arch.input() {
        InputKind::Waveform { len } => {
            let clip = load_prepared(path)?;
            if clip.samples.len() != len {
                return Err(LidError::InvalidConfig(format!(
                    "model expects {len} samples but clips prepare to {}",
                    clip.samples.len()
                )));
            }
            Ok((Tensor::new(vec![1, len], clip.samples)?, None))
        }
        InputKind::Image { .. } => {
            let bytes = fs::read(path).map_err(|e| LidError::io(path, e))?;
            let compute = || -> Result<Tensor<f32>> {
                let clip = prepare(&read_wav_bytes(&bytes, &path.to_string_lossy())?)?;
                Ok(mel_image(&clip, mel)?.pixels)
            };
            match cache {
                Some(c) => {
                    let (t, o) = c.get_or_compute(&cache_key(&bytes, mel), compute)?;
                    Ok((t, Some(o)))
                }
                None => Ok((compute()?, None)),
            }
        }
    }
}

/// Loads every entry's model input, spreading files over `workers` threads.
/// Output order follows the manifest regardless of scheduling.
pub fn load_features(
    manifest: &Manifest,
    arch: &ArchConfig,
    mel: &MelConfig,
    cache: Option<&FeatureCache>,
    workers: usize,
) -> Result<(FeatureSet, LoadStats)> {
    let n = manifest.entries.len();
    let workers = workers.clamp(1, n.max(1));
    let chunk = n.div_ceil(workers).max(1);
    let results: Vec<Result<(Tensor<f32>, Option<CacheOutcome>)>> = std::thread::scope(|s| {
        let handles: Vec<_> = manifest
            .entries
            .chunks(chunk)
            .map(|part| {
                s.spawn(move || part.iter().map(|e| load_one(&e.path, arch, mel, cache)).collect::<Vec<_>>())
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("feature worker panicked")).collect()
    });
    let mut stats = LoadStats::default();
    let mut inputs = Vec::with_capacity(n);
    for (r, e) in results.into_iter().zip(&manifest.entries) {
        let (t, outcome) = r.map_err(|err| match err {
            LidError::InvalidConfig(_) | LidError::Io { .. } => err,
            other => LidError::InvalidCorpus(format!("{}: {other}", e.path.display())),
        })?;
        match outcome {
            Some(CacheOutcome::Hit) => stats.hits += 1,
            Some(CacheOutcome::Computed) | None => stats.computed += 1,
            Some(CacheOutcome::Recomputed) => stats.recomputed += 1,
        }
        inputs.push(t);
    }
    Ok((FeatureSet::new(inputs, manifest.labels(), manifest.num_classes())?, stats))
}
