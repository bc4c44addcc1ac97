//! Audio loading, resampling to 8 kHz and framing to fixed 10-second clips.

mod resample;
mod wav;

pub use resample::{bessel_i0, resample, Resampler, CUTOFF_FRACTION, KAISER_BETA, TAPS_PER_PHASE};
pub use wav::{decode_samples, encode_wav16, parse_header, probe_wav, read_wav, read_wav_bytes, write_wav, WavFormat, WavInfo};

use std::path::Path;

use crate::error::{LidError, Result};

pub const TARGET_RATE: u32 = 8000;
pub const CLIP_SECONDS: usize = 10;
pub const CLIP_LEN: usize = TARGET_RATE as usize * CLIP_SECONDS;

#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
    pub label: Option<usize>,
    pub source_path: String,
}

impl AudioClip {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Self {
        Self { samples, sample_rate, label: None, source_path: String::new() }
    }

    pub fn with_label(mut self, label: usize) -> Self {
        self.label = Some(label);
        self
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn is_prepared(&self) -> bool {
        self.sample_rate == TARGET_RATE && self.samples.len() == CLIP_LEN
    }
}

/// Tiles a short clip from its start or keeps the head of a long one so that
/// it lasts exactly `target_seconds`.
pub fn fix_length(clip: &AudioClip, target_seconds: usize) -> Result<AudioClip> {
    if clip.samples.is_empty() {
        return Err(LidError::InvalidArgument(format!("empty clip {}", clip.source_path)));
    }
    let target = clip.sample_rate as usize * target_seconds;
    let samples = clip.samples.iter().copied().cycle().take(target).collect();
    Ok(AudioClip { samples, ..clip.clone() })
}

/// Resamples to 8 kHz, clamps into [−1, 1] and frames to ten seconds.
pub fn prepare(clip: &AudioClip) -> Result<AudioClip> {
    let mut out = resample(clip, TARGET_RATE)?;
    for s in &mut out.samples {
        *s = if s.is_finite() { s.clamp(-1.0, 1.0) } else { 0.0 };
    }
    fix_length(&out, CLIP_SECONDS)
}

pub fn load_prepared(path: impl AsRef<Path>) -> Result<AudioClip> {
    prepare(&read_wav(path)?)
}
