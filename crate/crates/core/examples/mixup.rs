//! Mixes a batch of images and one-hot labels and shows the resulting soft labels.
//!
//! `cargo run --example mixup`

use lidf::augment::{mixup_batch, sample_alpha, MixupConfig};
use lidf_tensor::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> lidf::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let config = MixupConfig { enabled: true, ..Default::default() };
    let images = Tensor::from_fn(vec![4, 3, 8, 8], |i| (i / 192) as f32);
    let labels = Tensor::from_fn(vec![4, 4], |i| if i % 4 == i / 4 { 1.0 } else { 0.0 });

    let (mixed, soft, alpha) = mixup_batch(&images, &labels, &mut rng, &config)?;
    println!("alpha = {:.3}", alpha.unwrap_or(1.0));
    for (i, row) in soft.data().chunks(4).enumerate() {
        println!("example {i}: pixel {:.3}, label {row:.3?}", mixed.data()[i * 192]);
    }

    let n = 10_000;
    let mean = (0..n).map(|_| sample_alpha(&mut rng, config.beta_a)).sum::<lidf::Result<f64>>()? / n as f64;
    println!("mean of {n} Beta({0}, {0}) draws: {mean:.4}", config.beta_a);
    Ok(())
}
