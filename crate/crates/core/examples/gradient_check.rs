//! Compares backprop gradients of a shrunken 1D model with central differences.
//!
//! `cargo run --example gradient_check`

use lidf::models::{Arch1DConfig, ArchConfig, Model};
use lidf_tensor::{grad_check_all, Graph, Mode, Tensor, TensorError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> lidf::Result<()> {
    let arch = ArchConfig::Conv1d(Arch1DConfig { first_layer_filters: 2, input_len: 1200, num_classes: 3, ..Default::default() });
    for seed in 0..3 {
        let Model { net, mut store, .. } = Model::<f64>::seeded(&arch, seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Tensor::from_fn(vec![2, 1, 1200], |_| rng.random_range(-1.0..1.0));
        let targets = Tensor::new(vec![2, 3], vec![1.0, 0.0, 0.0, 0.0, 0.5, 0.5])?;
        let report = grad_check_all(&mut store, 1e-4, 3, &mut rng, |g: &mut Graph<'_, f64>| {
            let xv = g.input(x.clone());
            // Eval mode keeps dropout out of the comparison.
            let y = net
                .forward(&mut lidf::models::Fwd { g: &mut *g, mode: Mode::Eval, rng: &mut ChaCha8Rng::seed_from_u64(0), trace: None }, xv)
                .map_err(|e| TensorError::InvalidState(e.to_string()))?;
            g.softmax_cross_entropy(y, &targets)
        })?;
        println!(
            "seed {seed}: {} coordinates, worst relative error {:.2e}",
            report.coords_checked, report.max_rel_error
        );
    }
    Ok(())
}
