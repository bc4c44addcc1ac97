//! Rational-ratio polyphase resampler with a Kaiser-windowed sinc kernel.
//!
//! Output sample `n` sits at input time `n · src / dst`. Writing that ratio in
//! lowest terms as `down / up`, the fractional position repeats with period
//! `up`, so one short filter per phase is precomputed (or built on the fly
//! when `up` is large).

use crate::audio::AudioClip;
use crate::error::{LidError, Result};

pub const KAISER_BETA: f64 = 8.6;
pub const TAPS_PER_PHASE: usize = 64;
/// Cut-off as a fraction of the lower of the two Nyquist frequencies.
pub const CUTOFF_FRACTION: f64 = 0.9;
const MAX_CACHED_PHASES: u64 = 4096;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Zeroth-order modified Bessel function of the first kind (power series).
pub fn bessel_i0(x: f64) -> f64 {
    let q = (x / 2.0) * (x / 2.0);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k as f64 * k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

#[derive(Debug, Clone)]
pub struct Resampler {
    src: u32,
    dst: u32,
    up: u64,
    down: u64,
    /// Cut-off in cycles per input sample.
    cutoff: f64,
    bank: Option<Vec<Vec<f64>>>,
}

impl Resampler {
    pub fn new(src: u32, dst: u32) -> Result<Self> {
        if src == 0 || dst == 0 {
            return Err(LidError::InvalidArgument(format!(
                "sample rates must be positive, got {src} → {dst}"
            )));
        }
        let g = gcd(src as u64, dst as u64);
        let (up, down) = (dst as u64 / g, src as u64 / g);
        let nyquist = src.min(dst) as f64 / 2.0;
        let cutoff = CUTOFF_FRACTION * nyquist / src as f64;
        let mut r = Self { src, dst, up, down, cutoff, bank: None };
        if up <= MAX_CACHED_PHASES {
            r.bank = Some((0..up).map(|p| r.phase_filter(p)).collect());
        }
        Ok(r)
    }

    /// Taps for input offsets `k − H + 1 ..= k + H` around the output time,
    /// where the output lies `phase / up` of a sample after the base index.
    fn phase_filter(&self, phase: u64) -> Vec<f64> {
        let half = TAPS_PER_PHASE as f64 / 2.0;
        let frac = phase as f64 / self.up as f64;
        let denom = bessel_i0(KAISER_BETA);
        let mut taps: Vec<f64> = (0..TAPS_PER_PHASE)
            .map(|j| {
                // Distance from tap to output time, in input samples.
                let t = j as f64 - (half - 1.0) - frac;
                let r = t / half;
                let window = if r.abs() >= 1.0 {
                    0.0
                } else {
                    bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / denom
                };
                2.0 * self.cutoff * sinc(2.0 * self.cutoff * t) * window
            })
            .collect();
        let sum: f64 = taps.iter().sum();
        taps.iter_mut().for_each(|v| *v /= sum);
        taps
    }

    pub fn output_len(&self, input_len: usize) -> usize {
        ((input_len as f64) * self.dst as f64 / self.src as f64).round() as usize
    }

    pub fn process(&self, input: &[f32]) -> Vec<f32> {
        if self.src == self.dst {
            return input.to_vec();
        }
        let n_out = self.output_len(input.len());
        let half = TAPS_PER_PHASE as i64 / 2;
        let mut out = Vec::with_capacity(n_out);
        let mut scratch;
        for n in 0..n_out as u64 {
            let pos = n * self.down;
            let base = (pos / self.up) as i64;
            let phase = pos % self.up;
            let taps: &[f64] = match &self.bank {
                Some(bank) => &bank[phase as usize],
                None => {
                    scratch = self.phase_filter(phase);
                    &scratch
                }
            };
            let start = base - half + 1;
            let mut acc = 0.0;
            for (j, &h) in taps.iter().enumerate() {
                let idx = start + j as i64;
                if idx >= 0 && (idx as usize) < input.len() {
                    acc += h * input[idx as usize] as f64;
                }
            }
            out.push(acc as f32);
        }
        out
    }
}

/// Band-limited conversion of `clip` to `target_rate`; bit-exact copy when
/// the rates already match.
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip> {
    let r = Resampler::new(clip.sample_rate, target_rate)?;
    Ok(AudioClip {
        samples: r.process(&clip.samples),
        sample_rate: target_rate,
        label: clip.label,
        source_path: clip.source_path.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_known_values() {
        assert!((bessel_i0(0.0) - 1.0).abs() < 1e-15);
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008_4).abs() < 1e-12);
        assert!((bessel_i0(2.0) - 2.279_585_302_336_067_3).abs() < 1e-12);
        assert!((bessel_i0(8.6) / 750.461_159_563_166 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn identity_rate_is_bit_exact() {
        let clip = AudioClip::new((0..100).map(|i| (i as f32 * 0.37).sin()).collect(), 8000);
        let out = resample(&clip, 8000).unwrap();
        assert_eq!(out.samples, clip.samples);
    }

    #[test]
    fn zero_rate_rejected() {
        assert!(Resampler::new(0, 8000).is_err());
        assert!(Resampler::new(8000, 0).is_err());
    }

    #[test]
    fn dc_is_preserved_away_from_edges() {
        for (src, dst) in [(16000, 8000), (44100, 8000), (8000, 22050), (11025, 8000)] {
            let r = Resampler::new(src, dst).unwrap();
            let out = r.process(&vec![0.25; 4000]);
            let mid = &out[out.len() / 4..3 * out.len() / 4];
            assert!(mid.iter().all(|v| (v - 0.25).abs() < 1e-6), "{src}->{dst}");
        }
    }

    #[test]
    fn output_length_rounds() {
        let r = Resampler::new(44100, 8000).unwrap();
        assert_eq!(r.output_len(44100), 8000);
        assert_eq!(r.output_len(1000), 181);
    }
}
