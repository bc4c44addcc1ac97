//! Finite-difference checks of whole shrunken models in f64.

#![allow(dead_code)]

use lidf::models::*;
use lidf_tensor::{grad_check_all, Graph, Mode, Tensor, TensorError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: u64 = 20;
const TOL: f64 = 1e-3;
/// Large enough that f64 roundoff on an O(1) loss (a few ulps / 2ε) stays
/// well under tolerance for structurally zero gradients; kink straddles at
/// this step are detected and resampled.
const EPS: f64 = 1e-4;
const COORDS: usize = 3;
const BATCH: usize = 3;

fn tiny_1d() -> ArchConfig {
    ArchConfig::Conv1d(Arch1DConfig { first_layer_filters: 2, input_len: 1200, num_classes: 3, ..Default::default() })
}

fn tiny_2d_base() -> Arch2DConfig {
    Arch2DConfig {
        first_layer_filters: 8,
        image_size: 16,
        gru_hidden_per_direction: 4,
        embedding_dim: 6,
        dense_units: 5,
        num_classes: 3,
        ..Default::default()
    }
}

fn check(arch: ArchConfig) {
    let mut worst = 0.0f64;
    let (mut checked, mut kinks) = (0, 0);
    for seed in 0..SEEDS {
        let model = Model::<f64>::seeded(&arch, seed).unwrap();
        let Model { net, mut store, .. } = model;
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let mut shape = vec![BATCH];
        shape.extend(arch.input_shape());
        let x = Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0));
        let c = arch.num_classes();
        let targets = Tensor::from_fn(vec![BATCH, c], |i| if i % c == (i / c) % c { 0.7 } else { 0.3 / (c - 1) as f64 });
        let report = grad_check_all(&mut store, EPS, COORDS, &mut rng, |g: &mut Graph<'_, f64>| {
            let xv = g.input(x.clone());
            let mut drop_rng = ChaCha8Rng::seed_from_u64(seed);
            let y = net.forward(&mut Fwd { g: &mut *g, mode: Mode::Train, rng: &mut drop_rng, trace: None }, xv)
                .map_err(|e| TensorError::InvalidState(e.to_string()))?;
            Ok(g.softmax_cross_entropy(y, &targets)?)
        })
        .unwrap();
        assert!(report.max_rel_error < TOL, "{} seed {seed}: {:?}", arch.id(), report.worst);
        let n_params = store.params().len();
        assert!(
            report.coords_checked >= report.kinks_skipped && report.coords_checked >= n_params,
            "{} seed {seed}: too few smooth coordinates {report:?}",
            arch.id()
        );
        worst = worst.max(report.max_rel_error);
        checked += report.coords_checked;
        kinks += report.kinks_skipped;
    }
    println!("{}: worst relative error {worst:.2e} over {SEEDS} seeds ({checked} coordinates, {kinks} kink straddles resampled)", arch.id());
    let mut w = WORST.lock().unwrap();
    *w = w.max(worst);
}

static WORST: std::sync::Mutex<f64> = std::sync::Mutex::new(0.0);

/// Largest relative error over every model checked so far in this process.
pub fn worst_seen() -> f64 {
    *WORST.lock().unwrap()
}

pub fn conv1d_model_gradients() {
    check(tiny_1d());
}

pub fn conv2d_model_gradients() {
    check(ArchConfig::Conv2d(tiny_2d_base()));
}

pub fn attn_gru_model_gradients() {
    check(ArchConfig::AttnGru(AttnGruConfig { base: tiny_2d_base(), ..Default::default() }));
}

pub const MODEL_CHECKS: &[(&str, fn())] = &[
    ("conv1d_model_gradients", conv1d_model_gradients),
    ("conv2d_model_gradients", conv2d_model_gradients),
    ("attn_gru_model_gradients", attn_gru_model_gradients),
];
