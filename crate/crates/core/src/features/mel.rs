use crate::error::{LidError, Result};

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular mel filters, `[n_mels, n_fft/2 + 1]` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Filterbank {
    pub n_mels: usize,
    pub n_bins: usize,
    /// Edge frequencies in Hz: filter `m` spans `edges[m]..edges[m + 2]` and peaks at `edges[m + 1]`.
    pub edges: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Filterbank {
    pub fn row(&self, m: usize) -> &[f64] {
        &self.weights[m * self.n_bins..(m + 1) * self.n_bins]
    }

    pub fn center_hz(&self, m: usize) -> f64 {
        self.edges[m + 1]
    }

    /// Triangle height at bin `k` before area normalization.
    pub fn unnormalized(&self, m: usize, freq: f64) -> f64 {
        let (lo, c, hi) = (self.edges[m], self.edges[m + 1], self.edges[m + 2]);
        let rise = (freq - lo) / (c - lo);
        let fall = (hi - freq) / (hi - c);
        rise.min(fall).max(0.0)
    }
}

pub fn bin_hz(k: usize, n_fft: usize, sample_rate: u32) -> f64 {
    k as f64 * sample_rate as f64 / n_fft as f64
}

pub fn mel_filterbank(n_mels: usize, n_fft: usize, sample_rate: u32, f_min: f64, f_max: f64) -> Result<Filterbank> {
    if n_mels == 0 {
        return Err(LidError::InvalidArgument("n_mels must be positive".into()));
    }
    if !(f_min >= 0.0 && f_min < f_max && f_max <= sample_rate as f64 / 2.0) {
        return Err(LidError::InvalidArgument(format!(
            "need 0 <= f_min < f_max <= {}, got {f_min}..{f_max}",
            sample_rate as f64 / 2.0
        )));
    }
    let (lo, hi) = (hz_to_mel(f_min), hz_to_mel(f_max));
    let edges: Vec<f64> = (0..n_mels + 2).map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_mels + 1) as f64)).collect();
    let n_bins = n_fft / 2 + 1;
    let mut fb = Filterbank { n_mels, n_bins, edges, weights: vec![0.0; n_mels * n_bins] };
    for m in 0..n_mels {
        let norm = 2.0 / (fb.edges[m + 2] - fb.edges[m]);
        let mut any = false;
        for k in 0..n_bins {
            let w = fb.unnormalized(m, bin_hz(k, n_fft, sample_rate));
            any |= w > 0.0;
            fb.weights[m * n_bins + k] = w * norm;
        }
        if !any {
            return Err(LidError::InvalidArgument(format!(
                "mel filter {m} ({:.1}–{:.1} Hz) covers no FFT bin; reduce n_mels or raise n_fft",
                fb.edges[m],
                fb.edges[m + 2]
            )));
        }
    }
    Ok(fb)
}
