//! Synthetic "languages": harmonic tones in distinct pitch bands with
//! class-specific amplitude modulation and coloured noise.

use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Manifest, ManifestEntry};
use crate::audio::encode_wav16;
use crate::container::sha256_hex;
use crate::error::{LidError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_classes: usize,
    pub n_per_class: usize,
    pub seed: u64,
    pub sample_rate: u32,
    pub min_seconds: f64,
    pub max_seconds: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self { n_classes: 6, n_per_class: 40, seed: 0, sample_rate: 16000, min_seconds: 2.0, max_seconds: 12.0 }
    }
}

/// Per-class signal recipe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Signature {
    pub f0_hz: f64,
    pub harmonics: usize,
    pub am_hz: f64,
    /// Exponent of the one-pole noise filter: 0 white, towards 1 brown.
    pub noise_pole: f64,
}

pub fn signature(class: usize) -> Signature {
    const F0: [f64; 8] = [110.0, 175.0, 280.0, 450.0, 720.0, 1150.0, 1500.0, 1800.0];
    const AM: [f64; 8] = [2.0, 3.0, 5.0, 7.0, 11.0, 13.0, 17.0, 19.0];
    Signature {
        f0_hz: F0[class % 8] * (1.0 + 0.05 * (class / 8) as f64),
        harmonics: 5usize.saturating_sub(class % 8 / 2).max(2),
        am_hz: AM[class % 8],
        noise_pole: [0.0, 0.5, 0.9][class % 3],
    }
}

pub fn render_clip<R: Rng + ?Sized>(sig: &Signature, seconds: f64, rate: u32, rng: &mut R) -> Vec<f32> {
    let n = (seconds * rate as f64).round() as usize;
    let f0 = sig.f0_hz * rng.random_range(0.98..1.02);
    let am = sig.am_hz * rng.random_range(0.9..1.1);
    let phase: f64 = rng.random_range(0.0..TAU);
    let nyquist = rate as f64 / 2.0;
    let mut noise = 0.0f64;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / rate as f64;
        let mut s = 0.0;
        for h in 1..=sig.harmonics {
            let f = f0 * h as f64;
            if f < nyquist * 0.9 {
                s += (TAU * f * t).sin() / h as f64;
            }
        }
        let env = 0.8 + 0.2 * (TAU * am * t + phase).sin();
        let white: f64 = rng.random_range(-1.0..1.0);
        noise = sig.noise_pole * noise + (1.0 - sig.noise_pole) * white;
        out.push((0.35 * env * s + 0.03 * noise).clamp(-1.0, 1.0) as f32);
    }
    out
}

/// Writes `out_dir/syn<c>/clip<j>.wav` and returns the matching manifest.
pub fn synth_corpus(out_dir: impl AsRef<Path>, spec: &SynthSpec) -> Result<Manifest> {
    let out_dir = out_dir.as_ref();
    if spec.n_classes < 2 || spec.n_per_class < 1 {
        return Err(LidError::InvalidArgument(format!("need >= 2 classes and >= 1 clip per class: {spec:?}")));
    }
    if !(spec.min_seconds > 0.0 && spec.min_seconds <= spec.max_seconds) {
        return Err(LidError::InvalidArgument(format!("bad duration range {}..{}", spec.min_seconds, spec.max_seconds)));
    }
    let languages: Vec<String> = (0..spec.n_classes).map(|c| format!("syn{c}")).collect();
    let mut entries = Vec::new();
    for (c, lang) in languages.iter().enumerate() {
        let dir = out_dir.join(lang);
        fs::create_dir_all(&dir).map_err(|e| LidError::io(&dir, e))?;
        let sig = signature(c);
        for j in 0..spec.n_per_class {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(((c as u64) << 32) | j as u64);
            let secs = rng.random_range(spec.min_seconds..=spec.max_seconds);
            let samples = render_clip(&sig, secs, spec.sample_rate, &mut rng);
            let bytes = encode_wav16(&samples, spec.sample_rate);
            let path = dir.join(format!("clip{j:04}.wav"));
            fs::write(&path, &bytes).map_err(|e| LidError::io(&path, e))?;
            let duration_ms = (samples.len() as f64 * 1000.0 / spec.sample_rate as f64).round() as u64;
            entries.push(ManifestEntry { path, label: c, duration_ms, hash: sha256_hex(&bytes) });
        }
    }
    let m = Manifest { languages, entries };
    m.validate()?;
    Ok(m)
}
