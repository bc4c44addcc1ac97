//! Weight initializers.

use rand::Rng;

use crate::scalar::Scalar;
use crate::tensor::{numel, Tensor};

/// Standard normal via Box–Muller; kept local so draws are stable across
/// `rand` releases.
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// He-normal: `N(0, 2 / fan_in)`, suited to ReLU stacks.
pub fn kaiming_normal<T: Scalar, R: Rng + ?Sized>(shape: Vec<usize>, fan_in: usize, rng: &mut R) -> Tensor<T> {
    let std = (2.0 / fan_in as f64).sqrt();
    let n = numel(&shape);
    Tensor::new(shape, (0..n).map(|_| T::lit(std * standard_normal(rng))).collect())
        .expect("consistent shape")
}

/// Glorot-uniform: `U(±sqrt(6 / (fan_in + fan_out)))`.
pub fn xavier_uniform<T: Scalar, R: Rng + ?Sized>(
    shape: Vec<usize>,
    fan_in: usize,
    fan_out: usize,
    rng: &mut R,
) -> Tensor<T> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    uniform(shape, bound, rng)
}

pub fn uniform<T: Scalar, R: Rng + ?Sized>(shape: Vec<usize>, bound: f64, rng: &mut R) -> Tensor<T> {
    let n = numel(&shape);
    Tensor::new(shape, (0..n).map(|_| T::lit(rng.random_range(-bound..=bound))).collect())
        .expect("consistent shape")
}
