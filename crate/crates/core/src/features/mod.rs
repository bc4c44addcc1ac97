//! Log-Mel spectrogram extraction and three-channel image rendering.

mod cache;
mod image;
mod mel;
mod stft;

pub use cache::{cache_key, CacheOutcome, FeatureCache};
pub use image::{colormap, render_image, resize_bilinear, write_png, MelImage, COLORMAP};
pub use mel::{bin_hz, hz_to_mel, mel_filterbank, mel_to_hz, Filterbank};
pub use stft::{hann, stft_power, PowerSpectrum};

use serde::{Deserialize, Serialize};

use crate::audio::{AudioClip, TARGET_RATE};
use crate::error::{LidError, Result};

pub const DB_FLOOR: f64 = -80.0;
pub const POWER_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MelConfig {
    pub n_fft: usize,
    pub hop: usize,
    pub n_mels: usize,
    pub f_min: f64,
    pub f_max: f64,
    pub image_size: usize,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self { n_fft: 1024, hop: 625, n_mels: 128, f_min: 0.0, f_max: 4000.0, image_size: 128 }
    }
}

/// Log-power in dB, `[n_mels, n_frames]` row-major, within [−80, 0].
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    pub values: Vec<f32>,
    pub n_mels: usize,
    pub n_frames: usize,
}

impl MelSpectrogram {
    pub fn at(&self, mel: usize, frame: usize) -> f32 {
        self.values[mel * self.n_frames + frame]
    }
}

/// Converts a prepared clip to peak-normalized dB. The centered STFT yields
/// one frame more than `len / hop`; the trailing frame is dropped.
pub fn log_mel(clip: &AudioClip, config: &MelConfig) -> Result<MelSpectrogram> {
    if !clip.is_prepared() {
        return Err(LidError::InvalidState(format!(
            "clip {} is not prepared ({} samples at {} Hz)",
            clip.source_path,
            clip.samples.len(),
            clip.sample_rate
        )));
    }
    log_mel_samples(&clip.samples, config)
}

pub fn log_mel_samples(samples: &[f32], config: &MelConfig) -> Result<MelSpectrogram> {
    let power = stft_power(samples, config.n_fft, config.hop)?;
    let fb = mel_filterbank(config.n_mels, config.n_fft, TARGET_RATE, config.f_min, config.f_max)?;
    let n_frames = (samples.len() / config.hop).max(1);
    let mut db = vec![0.0f64; config.n_mels * n_frames];
    for m in 0..config.n_mels {
        let row = fb.row(m);
        for f in 0..n_frames {
            let e: f64 = row.iter().enumerate().filter(|(_, w)| **w > 0.0).map(|(k, w)| w * power.at(k, f)).sum();
            db[m * n_frames + f] = 10.0 * e.max(POWER_FLOOR).log10();
        }
    }
    let peak = db.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let silent = peak <= 10.0 * POWER_FLOOR.log10();
    let values = db
        .iter()
        .map(|&v| if silent { DB_FLOOR } else { (v - peak).clamp(DB_FLOOR, 0.0) } as f32)
        .collect();
    Ok(MelSpectrogram { values, n_mels: config.n_mels, n_frames })
}

/// Full image pipeline for one prepared clip.
pub fn mel_image(clip: &AudioClip, config: &MelConfig) -> Result<MelImage> {
    render_image(&log_mel(clip, config)?, config.image_size)
}
