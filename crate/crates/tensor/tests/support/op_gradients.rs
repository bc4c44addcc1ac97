//! Finite-difference checks of every differentiable op, 20 seeds each.

#![allow(dead_code)]

use lidf_tensor::gradcheck::DEFAULT_EPSILON;
use lidf_tensor::init::standard_normal;
use lidf_tensor::{
    grad_check_all, Graph, GruWeights, Mode, ParamId, ParamStore, Result, RunningStats, Tensor, Var,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: u64 = 20;
const OP_TOL: f64 = 1e-4;
/// Step for piecewise-linear ops (ReLU, max): small enough that no kink is
/// crossed, large enough that f64 roundoff stays far below tolerance.
const KINK_EPSILON: f64 = 1e-6;

fn randn(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::from_fn(shape.to_vec(), |_| standard_normal(rng))
}

/// Values spaced at least `gap` apart, shuffled, so max ops have no near-ties.
fn distinct(shape: &[usize], gap: f64, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    let mut v: Vec<f64> = (0..n).map(|i| (i as f64 - n as f64 / 2.0) * gap).collect();
    for i in (1..n).rev() {
        v.swap(i, rng.random_range(0..=i));
    }
    Tensor::new(shape.to_vec(), v).unwrap()
}

/// Random linear functional of `y`, so every output coordinate matters.
fn project(g: &mut Graph<'_, f64>, y: Var, weights: &Tensor<f64>) -> Result<Var> {
    let w = g.input(weights.clone());
    let p = g.mul(y, w)?;
    Ok(g.sum(p))
}

fn run_check<F>(name: &str, epsilon: f64, tol: f64, mut setup: F)
where
    F: FnMut(&mut ChaCha8Rng) -> (ParamStore<f64>, Box<dyn FnMut(&mut Graph<'_, f64>) -> Result<Var>>),
{
    let mut worst: f64 = 0.0;
    for seed in 0..SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut store, mut forward) = setup(&mut rng);
        let report = grad_check_all(&mut store, epsilon, 64, &mut rng, |g| forward(g)).unwrap();
        assert!(report.coords_checked > 0);
        assert!(
            report.max_rel_error < tol,
            "{name} seed {seed}: rel error {} at {:?}",
            report.max_rel_error,
            report.worst
        );
        worst = worst.max(report.max_rel_error);
    }
    eprintln!("{name}: worst relative error {worst:.3e}");
    let mut w = WORST.lock().unwrap();
    *w = w.max(worst);
}

static WORST: std::sync::Mutex<f64> = std::sync::Mutex::new(0.0);

/// Largest relative error over every check run so far in this process.
pub fn worst_seen() -> f64 {
    *WORST.lock().unwrap()
}

type Fwd = Box<dyn FnMut(&mut Graph<'_, f64>) -> Result<Var>>;

fn params(store: &mut ParamStore<f64>, named: Vec<(&str, Tensor<f64>)>) -> Vec<ParamId> {
    named.into_iter().map(|(n, t)| store.add_param(n, t)).collect()
}

fn vars(g: &mut Graph<'_, f64>, ids: &[ParamId]) -> Vec<Var> {
    ids.iter().map(|&i| g.param(i)).collect()
}

pub fn conv1d_gradients() {
    run_check("conv1d", DEFAULT_EPSILON, OP_TOL, |rng| {
        let stride = rng.random_range(1..=3);
        let k = rng.random_range(1..=4);
        let len = rng.random_range(k..k + 9);
        let out = (len - k) / stride + 1;
        let mut store = ParamStore::new();
        let ids = params(&mut store, vec![("x", randn(&[2, 3, len], rng)), ("w", randn(&[4, 3, k], rng))]);
        let proj = randn(&[2, 4, out], rng);
        let f: Fwd = Box::new(move |g| {
            let v = vars(g, &ids);
            let y = g.conv1d(v[0], v[1], stride)?;
            project(g, y, &proj)
        });
        (store, f)
    });
}

pub fn conv2d_gradients() {
    run_check("conv2d", DEFAULT_EPSILON, OP_TOL, |rng| {
        let stride = (rng.random_range(1..=2), rng.random_range(1..=2));
        let pad = (rng.random_range(0..=1), rng.random_range(0..=1));
        let (h, w) = (rng.random_range(3..7), rng.random_range(3..7));
        let mut store = ParamStore::new();
        let ids = params(&mut store, vec![("x", randn(&[2, 2, h, w], rng)), ("w", randn(&[3, 2, 3, 3], rng))]);
        let oh = (h + 2 * pad.0 - 3) / stride.0 + 1;
        let ow = (w + 2 * pad.1 - 3) / stride.1 + 1;
        let proj = randn(&[2, 3, oh, ow], rng);
        let f: Fwd = Box::new(move |g| {
            let v = vars(g, &ids);
            let y = g.conv2d(v[0], v[1], stride, pad)?;
            project(g, y, &proj)
        });
        (store, f)
    });
}

pub fn maxpool1d_gradients() {
    run_check("maxpool1d", KINK_EPSILON, OP_TOL, |rng| {
        let window = rng.random_range(1..=4);
        let stride = rng.random_range(1..=4);
        let len = rng.random_range(window..window + 10);
        let out = (len - window) / stride + 1;
        let mut store = ParamStore::new();
        let ids = params(&mut store, vec![("x", distinct(&[2, 3, len], 0.01, rng))]);
        let proj = randn(&[2, 3, out], rng);
        let f: Fwd = Box::new(move |g| {
            let x = g.param(ids[0]);
            let y = g.maxpool1d(x, window, stride)?;
            project(g, y, &proj)
        });
        (store, f)
    });
}

pub fn global_maxpool_and_max_axis_gradients() {
    run_check("global max", KINK_EPSILON, OP_TOL, |rng| {
        let mut store = ParamStore::new();
        let ids = params(&mut store, vec![("x", distinct(&[2, 3, 7], 0.01, rng))]);
        let p1 = randn(&[2, 3, 1], rng);
        let p2 = randn(&[2, 1, 7], rng);
        let f: Fwd = Box::new(move |g| {
            let x = g.param(ids[0]);
            let a = g.global_maxpool1d(x)?;
            let a = project(g, a, &p1)?;
            let b = g.max_axis(x, 1)?;
            let b = project(g, b, &p2)?;
            g.add(a, b)
        });
        (store, f)
    });
}

pub fn avgpool2d_gradients() {
    run_check("avgpool2d", DEFAULT_EPSILON, OP_TOL, |rng| {
        let window = (rng.random_range(1..=3), rng.random_range(1..=3));
        let stride = (rng.random_range(1..=3), rng.random_range(1..=3));
        let (h, w) = (rng.random_range(3..8), rng.random_range(3..8));
        let mut store = ParamStore::new();
        let ids = params(&mut store, vec![("x", randn(&[2, 2, h, w], rng))]);
        let proj = randn(&[2, 2, (h - window.0) / stride.0 + 1, (w - window.1) / stride.1 + 1], rng);
        let f: Fwd = Box::new(move |g| {
            let x = g.param(ids[0]);
            let y = g.avgpool2d(x, window, stride)?;
            project(g, y, &proj)
        });
        (store, f)
    });
}

fn batchnorm_check(mode: Mode) {
    run_check(&format!("batchnorm {mode:?}"), DEFAULT_EPSILON, OP_TOL, |rng| {
        let mut store = ParamStore::new();
        let ids = params(
            &mut store,
            vec![
                ("x", randn(&[4, 3, 5], rng)),
                ("gamma", Tensor::from_fn(vec![3], |_| 0.5 + rng.random::<f64>())),
                ("beta", randn(&[3], rng)),
            ],
        );
        let mean = store.add_buffer("rm", randn(&[3], rng));
        let var = store.add_buffer("rv", Tensor::from_fn(vec![3], |_| 0.5 + rng.random::<f64>()));
        let stats = RunningStats { mean, var };
        let proj = randn(&[4, 3, 5], rng);
        let f: Fwd = Box::new(move |g| {
            let v = vars(g, &ids);
            let y = g.batchnorm(v[0], v[1], v[2], stats, mode)?;
            project(g, y, &proj)
        });
        (store, f)
    });
}

pub fn batchnorm_train_gradients() {
    batchnorm_check(Mode::Train);
}

pub fn batchnorm_eval_gradients() {
    batchnorm_check(Mode::Eval);
}

pub fn activation_gradients() {
    run_check("relu/sigmoid/tanh", KINK_EPSILON, OP_TOL, |rng| {
        // ReLU inputs kept away from the kink at zero.
        let x = Tensor::from_fn(vec![3, 7], |_| {
            let v: f64 = rng.random_range(0.05..2.0);
            if rng.random::<bool>() { v } else { -v }
        });
        let mut store = ParamStore::new();
        let ids = params(&mut store, vec![("x", x), ("s", randn(&[3, 7], rng)), ("t", randn(&[3, 7], rng))]);
        let (p1, p2, p3) = (randn(&[3, 7], rng), randn(&[3, 7], rng), randn(&[3, 7], rng));
        let f: Fwd = Box::new(move |g| {
            let v = vars(g, &ids);
            let a = g.relu(v[0]);
            let a = project(g, a, &p1)?;
            let b = g.sigmoid(v[1]);
            let b = project(g, b, &p2)?;
            let c = g.tanh(v[2]);
            let c = project(g, c, &p3)?;
            let ab = g.add(a, b)?;
            g.add(ab, c)
        });
        (store, f)
    });
}

pub fn linear_gradients() {
    run_check("linear", DEFAULT_EPSILON, OP_TOL, |rng| {
        let mut store = ParamStore::new();
        let ids = params(&mut store, vec![("x", randn(&[2, 3, 5], rng)), ("w", randn(&[5, 4], rng))]);
        let proj = randn(&[2, 3, 4], rng);
        let f: Fwd = Box::new(move |g| {
            let v = vars(g, &ids);
            let y = g.linear(v[0], v[1])?;
            project(g, y, &proj)
        });
        (store, f)
    });
}

pub fn bigru_gradients() {
    run_check("bigru", DEFAULT_EPSILON, OP_TOL, |rng| {
        let (t, f_in, h) = (4, 3, 2);
        let mut store = ParamStore::new();
        let ids = params(
            &mut store,
            vec![
                ("x", randn(&[2, t, f_in], rng)),
                ("fi", randn(&[f_in, 3 * h], rng)),
                ("fh", randn(&[h, 3 * h], rng)),
                ("bi", randn(&[f_in, 3 * h], rng)),
                ("bh", randn(&[h, 3 * h], rng)),
            ],
        );
        let proj = randn(&[2, t, 2 * h], rng);
        let f: Fwd = Box::new(move |g| {
            let v = vars(g, &ids);
            let y = g.bigru(
                v[0],
                GruWeights { w_input: v[1], w_hidden: v[2] },
                GruWeights { w_input: v[3], w_hidden: v[4] },
                h,
            )?;
            project(g, y, &proj)
        });
        (store, f)
    });
}

pub fn dropout_gradients() {
    run_check("dropout", DEFAULT_EPSILON, OP_TOL, |rng| {
        let mask_seed: u64 = rng.random();
        let mut store = ParamStore::new();
        let ids = params(&mut store, vec![("x", randn(&[4, 6], rng))]);
        let proj = randn(&[4, 6], rng);
        let f: Fwd = Box::new(move |g| {
            let mut mrng = ChaCha8Rng::seed_from_u64(mask_seed);
            let x = g.param(ids[0]);
            let y = g.dropout(x, 0.3, Mode::Train, &mut mrng)?;
            project(g, y, &proj)
        });
        (store, f)
    });
}

pub fn softmax_cross_entropy_gradients() {
    run_check("softmax_cross_entropy", DEFAULT_EPSILON, OP_TOL, |rng| {
        let (b, c) = (3, 6);
        let mut t = vec![0.0; b * c];
        for row in t.chunks_mut(c) {
            let alpha: f64 = rng.random();
            row[rng.random_range(0..c)] += alpha;
            row[rng.random_range(0..c)] += 1.0 - alpha;
        }
        let targets = Tensor::new(vec![b, c], t).unwrap();
        let mut store = ParamStore::new();
        let ids = params(&mut store, vec![("z", randn(&[b, c], rng))]);
        let f: Fwd = Box::new(move |g| {
            let z = g.param(ids[0]);
            g.softmax_cross_entropy(z, &targets)
        });
        (store, f)
    });
}

pub fn shape_and_broadcast_gradients() {
    run_check("shape ops", DEFAULT_EPSILON, OP_TOL, |rng| {
        let mut store = ParamStore::new();
        let ids = params(
            &mut store,
            vec![("a", randn(&[2, 3, 4], rng)), ("s", randn(&[2, 3, 1], rng)), ("m", randn(&[1, 1, 4], rng))],
        );
        let proj = randn(&[4, 2, 5], rng);
        let f: Fwd = Box::new(move |g| {
            let v = vars(g, &ids);
            let a = g.mul(v[0], v[1])?;
            let a = g.add(a, v[2])?;
            let sq = g.mul(a, a)?;
            let p = g.permute(sq, &[2, 0, 1])?; // [4, 2, 3]
            let n = g.narrow(p, 2, 1, 2)?; // [4, 2, 2]
            let m = g.mean_axes(p, &[2], true)?; // [4, 2, 1]
            let sel = g.select(p, 2, 0)?; // [4, 2]
            let sel = g.reshape(sel, vec![4, 2, 1])?;
            let c = g.concat(&[n, m, sel], 2)?; // [4, 2, 4]
            let one = g.one_minus(c);
            let st = g.stack(&[one], 3)?; // [4, 2, 4, 1]
            let flat = g.reshape(st, vec![4, 2, 4])?;
            let last = g.mean_axes(a, &[0, 1, 2], true)?;
            let last = g.reshape(last, vec![1, 1, 1])?;
            let spread = g_broadcast(g, last, [4, 2, 1])?;
            let full = g.concat(&[flat, spread], 2)?;
            project(g, full, &proj)
        });
        (store, f)
    });
}

fn g_broadcast(g: &mut Graph<'_, f64>, v: Var, shape: [usize; 3]) -> Result<Var> {
    let ones = g.input(Tensor::ones(shape.to_vec()));
    g.mul(ones, v)
}

pub fn conv_relu_pool_stack_gradients() {
    run_check("conv2d+relu+avgpool", KINK_EPSILON, OP_TOL, |rng| {
        let mut store = ParamStore::new();
        let ids = params(&mut store, vec![("x", randn(&[1, 2, 8, 8], rng)), ("w", randn(&[3, 2, 3, 3], rng))]);
        let proj = randn(&[1, 3, 4, 4], rng);
        let f: Fwd = Box::new(move |g| {
            let v = vars(g, &ids);
            let y = g.conv2d(v[0], v[1], (1, 1), (1, 1))?;
            let y = g.relu(y);
            let y = g.avgpool2d(y, (2, 2), (2, 2))?;
            project(g, y, &proj)
        });
        (store, f)
    });
}

pub const OP_CHECKS: &[(&str, fn())] = &[
    ("conv1d_gradients", conv1d_gradients),
    ("conv2d_gradients", conv2d_gradients),
    ("maxpool1d_gradients", maxpool1d_gradients),
    ("global_maxpool_and_max_axis_gradients", global_maxpool_and_max_axis_gradients),
    ("avgpool2d_gradients", avgpool2d_gradients),
    ("batchnorm_train_gradients", batchnorm_train_gradients),
    ("batchnorm_eval_gradients", batchnorm_eval_gradients),
    ("activation_gradients", activation_gradients),
    ("linear_gradients", linear_gradients),
    ("bigru_gradients", bigru_gradients),
    ("dropout_gradients", dropout_gradients),
    ("softmax_cross_entropy_gradients", softmax_cross_entropy_gradients),
    ("shape_and_broadcast_gradients", shape_and_broadcast_gradients),
    ("conv_relu_pool_stack_gradients", conv_relu_pool_stack_gradients),
];
