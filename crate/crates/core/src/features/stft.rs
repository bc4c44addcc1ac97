use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{LidError, Result};

/// Power spectrogram laid out `[bins, frames]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum {
    pub bins: usize,
    pub frames: usize,
    pub data: Vec<f64>,
}

impl PowerSpectrum {
    pub fn at(&self, bin: usize, frame: usize) -> f64 {
        self.data[bin * self.frames + frame]
    }
}

/// Periodic Hann window of length `n`.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()).collect()
}

/// Mirror-pads by `pad` on each side without repeating the edge sample.
fn reflect_pad(x: &[f32], pad: usize) -> Vec<f64> {
    let n = x.len() as isize;
    (-(pad as isize)..n + pad as isize)
        .map(|i| {
            let j = if i < 0 {
                -i
            } else if i >= n {
                2 * (n - 1) - i
            } else {
                i
            };
            x[j as usize] as f64
        })
        .collect()
}

/// Centered STFT power with a Hann window; yields `len / hop + 1` frames.
pub fn stft_power(samples: &[f32], n_fft: usize, hop: usize) -> Result<PowerSpectrum> {
    if n_fft < 2 || !n_fft.is_power_of_two() {
        return Err(LidError::InvalidArgument(format!("n_fft {n_fft} is not a power of two")));
    }
    if hop == 0 {
        return Err(LidError::InvalidArgument("hop must be at least 1".into()));
    }
    let pad = n_fft / 2;
    if samples.len() <= pad {
        return Err(LidError::InvalidArgument(format!(
            "signal of {} samples is too short for reflect padding by {pad}",
            samples.len()
        )));
    }
    let padded = reflect_pad(samples, pad);
    let window = hann(n_fft);
    let frames = samples.len() / hop + 1;
    let bins = n_fft / 2 + 1;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_fft);
    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut data = vec![0.0; bins * frames];
    for f in 0..frames {
        let start = f * hop;
        for (i, b) in buf.iter_mut().enumerate() {
            *b = Complex::new(padded[start + i] * window[i], 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (k, c) in buf[..bins].iter().enumerate() {
            data[k * frames + f] = c.norm_sqr();
        }
    }
    Ok(PowerSpectrum { bins, frames, data })
}
