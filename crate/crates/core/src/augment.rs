//! Mixup: convex combinations of paired examples and their label rows.

use lidf_tensor::Tensor;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{LidError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixupConfig {
    pub enabled: bool,
    pub beta_a: f64,
    /// Also mix raw waveforms for the 1D model.
    pub waveform: bool,
}

impl Default for MixupConfig {
    fn default() -> Self {
        Self { enabled: false, beta_a: 0.4, waveform: false }
    }
}

impl MixupConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta_a > 0.0 && self.beta_a.is_finite()) {
            return Err(LidError::InvalidConfig(format!("mixup.beta_a must be positive, got {}", self.beta_a)));
        }
        Ok(())
    }
}

/// One draw from Beta(a, a) as X / (X + Y) with X, Y ~ Gamma(a, 1).
pub fn sample_alpha<R: Rng + ?Sized>(rng: &mut R, beta_a: f64) -> Result<f64> {
    let gamma = Gamma::new(beta_a, 1.0)
        .map_err(|e| LidError::InvalidArgument(format!("beta_a {beta_a}: {e}")))?;
    loop {
        let x = gamma.sample(rng);
        let y = gamma.sample(rng);
        // Both draws can underflow to zero for very small shapes.
        if x + y > 0.0 {
            return Ok((x / (x + y)).clamp(0.0, 1.0));
        }
    }
}

/// `out[i] = α·x[i] + (1 − α)·x[perm[i]]` for images and labels alike.
pub fn mix_with(images: &Tensor<f32>, labels: &Tensor<f32>, alpha: f64, perm: &[usize]) -> Result<(Tensor<f32>, Tensor<f32>)> {
    Ok((mix_rows(images, alpha, perm)?, mix_rows(labels, alpha, perm)?))
}

fn mix_rows(x: &Tensor<f32>, alpha: f64, perm: &[usize]) -> Result<Tensor<f32>> {
    let b = x.shape()[0];
    if perm.len() != b {
        return Err(LidError::InvalidArgument(format!("permutation of {} for batch {b}", perm.len())));
    }
    let row = x.len() / b;
    let d = x.data();
    let (a, c) = (alpha as f32, (1.0 - alpha) as f32);
    let mut out = Vec::with_capacity(x.len());
    for (i, &j) in perm.iter().enumerate() {
        let (ri, rj) = (&d[i * row..(i + 1) * row], &d[j * row..(j + 1) * row]);
        out.extend(ri.iter().zip(rj).map(|(&u, &v)| a * u + c * v));
    }
    Ok(Tensor::new(x.shape().to_vec(), out)?)
}

/// Returns the mixed batch and the α used (`None` when the batch is untouched).
pub fn mixup_batch<R: Rng + ?Sized>(
    images: &Tensor<f32>,
    labels: &Tensor<f32>,
    rng: &mut R,
    config: &MixupConfig,
) -> Result<(Tensor<f32>, Tensor<f32>, Option<f64>)> {
    if images.rank() < 1 || labels.rank() != 2 || images.shape()[0] != labels.shape()[0] {
        return Err(LidError::InvalidArgument(format!(
            "images {:?} and labels {:?} disagree on batch size",
            images.shape(),
            labels.shape()
        )));
    }
    let b = images.shape()[0];
    if !config.enabled {
        return Ok((images.clone(), labels.clone(), None));
    }
    if b < 2 {
        log::debug!("mixup skipped for a batch of {b}");
        return Ok((images.clone(), labels.clone(), None));
    }
    let alpha = sample_alpha(rng, config.beta_a)?;
    let mut perm: Vec<usize> = (0..b).collect();
    perm.shuffle(rng);
    let (x, y) = mix_with(images, labels, alpha, &perm)?;
    Ok((x, y, Some(alpha)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoint_of_a_swapped_pair() {
        let x = Tensor::new(vec![2, 2], vec![0.0, 2.0, 4.0, 6.0]).unwrap();
        let y = Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let (mx, my) = mix_with(&x, &y, 0.5, &[1, 0]).unwrap();
        assert_eq!(mx.data(), &[2.0, 4.0, 2.0, 4.0]);
        assert_eq!(my.data(), &[0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn alpha_one_is_identity() {
        let x = Tensor::from_fn(vec![3, 4], |i| i as f32 * 0.1);
        let y = Tensor::from_fn(vec![3, 3], |i| if i % 4 == 0 { 1.0 } else { 0.0 });
        let (mx, my) = mix_with(&x, &y, 1.0, &[2, 0, 1]).unwrap();
        assert_eq!((mx.data(), my.data()), (x.data(), y.data()));
    }

    #[test]
    fn bad_beta_rejected() {
        assert!(MixupConfig { beta_a: 0.0, ..Default::default() }.validate().is_err());
    }
}
