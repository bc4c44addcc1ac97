//! Central finite-difference verification of analytic gradients.
//!
//! Runs in `f64`: build the model in a `ParamStore<f64>` and pass a closure
//! that records the forward pass and returns the scalar loss. The closure is
//! called repeatedly and must be deterministic (reseed any RNG inside it).
//!
//! A coordinate whose `±ε` perturbation changes a ReLU or max-pool branch
//! straddles a kink, where the central difference does not estimate the
//! derivative. Such coordinates are counted in
//! [`GradCheckReport::kinks_skipped`] and replaced by fresh samples.

use rand::seq::index::sample;
use rand::Rng;

use crate::error::{ensure_arg, Result};
use crate::graph::{Graph, Var};
use crate::store::{ParamId, ParamStore};

pub const DEFAULT_EPSILON: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordinateError {
    pub param: ParamId,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst: Option<CoordinateError>,
    pub coords_checked: usize,
    pub kinks_skipped: usize,
}

impl GradCheckReport {
    fn absorb(&mut self, other: GradCheckReport) {
        self.coords_checked += other.coords_checked;
        self.kinks_skipped += other.kinks_skipped;
        if other.max_rel_error > self.max_rel_error || self.worst.is_none() {
            self.max_rel_error = self.max_rel_error.max(other.max_rel_error);
            if other.worst.is_some() && other.max_rel_error >= self.max_rel_error {
                self.worst = other.worst;
            }
        }
    }
}

/// `|a − n| / max(1e-8, |a| + |n|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Loss and branch signature at the store's current values.
fn eval_loss<F>(store: &ParamStore<f64>, forward: &mut F) -> Result<(f64, u64)>
where
    F: for<'a> FnMut(&mut Graph<'a, f64>) -> Result<Var>,
{
    let mut g = Graph::new(store);
    let loss = forward(&mut g)?;
    let t = g.value(loss);
    ensure_arg!(t.len() == 1, "gradient check needs a scalar loss, got shape {:?}", t.shape());
    Ok((t.item(), g.branch_signature()))
}

fn analytic<F>(store: &ParamStore<f64>, forward: &mut F) -> Result<crate::Gradients<f64>>
where
    F: for<'a> FnMut(&mut Graph<'a, f64>) -> Result<Var>,
{
    let mut g = Graph::new(store);
    let loss = forward(&mut g)?;
    g.backward(loss)
}

fn check_coords<F, R>(
    store: &mut ParamStore<f64>,
    param: ParamId,
    grad: &[f64],
    epsilon: f64,
    max_coords: usize,
    rng: &mut R,
    forward: &mut F,
) -> Result<GradCheckReport>
where
    F: for<'a> FnMut(&mut Graph<'a, f64>) -> Result<Var>,
    R: Rng + ?Sized,
{
    let len = store.param(param).len();
    // Spare candidates stand in for coordinates that straddle a kink.
    let budget = len.min(max_coords.saturating_mul(4));
    let candidates = sample(rng, len, budget).into_vec();
    let (_, base_sig) = eval_loss(store, forward)?;
    let mut report = GradCheckReport::default();
    for i in candidates {
        if report.coords_checked == max_coords {
            break;
        }
        let orig = store.param(param).data()[i];
        store.param_mut(param).data_mut()[i] = orig + epsilon;
        let plus = eval_loss(store, forward);
        store.param_mut(param).data_mut()[i] = orig - epsilon;
        let minus = eval_loss(store, forward);
        store.param_mut(param).data_mut()[i] = orig;
        let ((lp, sp), (lm, sm)) = (plus?, minus?);
        if sp != base_sig || sm != base_sig {
            report.kinks_skipped += 1;
            continue;
        }
        let numeric = (lp - lm) / (2.0 * epsilon);
        let rel = relative_error(grad[i], numeric);
        report.coords_checked += 1;
        if report.worst.is_none() || rel > report.max_rel_error {
            report.max_rel_error = report.max_rel_error.max(rel);
            report.worst =
                Some(CoordinateError { param, index: i, analytic: grad[i], numeric, rel_error: rel });
        }
    }
    Ok(report)
}

/// Checks up to `max_coords` randomly sampled coordinates of one parameter.
pub fn grad_check<F, R>(
    store: &mut ParamStore<f64>,
    param: ParamId,
    epsilon: f64,
    max_coords: usize,
    rng: &mut R,
    mut forward: F,
) -> Result<GradCheckReport>
where
    F: for<'a> FnMut(&mut Graph<'a, f64>) -> Result<Var>,
    R: Rng + ?Sized,
{
    ensure_arg!(epsilon > 0.0, "epsilon must be positive");
    let grads = analytic(store, &mut forward)?;
    let len = store.param(param).len();
    let grad = grads.param(param).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; len]);
    check_coords(store, param, &grad, epsilon, max_coords, rng, &mut forward)
}

/// [`grad_check`] over every parameter in the store, sharing one analytic pass.
pub fn grad_check_all<F, R>(
    store: &mut ParamStore<f64>,
    epsilon: f64,
    max_coords_per_param: usize,
    rng: &mut R,
    mut forward: F,
) -> Result<GradCheckReport>
where
    F: for<'a> FnMut(&mut Graph<'a, f64>) -> Result<Var>,
    R: Rng + ?Sized,
{
    ensure_arg!(epsilon > 0.0, "epsilon must be positive");
    let grads = analytic(store, &mut forward)?;
    let mut report = GradCheckReport::default();
    for id in store.param_ids().collect::<Vec<_>>() {
        let len = store.param(id).len();
        let grad = grads.param(id).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; len]);
        let r = check_coords(store, id, &grad, epsilon, max_coords_per_param, rng, &mut forward)?;
        report.absorb(r);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;
    use rand::SeedableRng;

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(1.0, 1.1) - 0.1 / 2.1).abs() < 1e-15);
    }

    #[test]
    fn kink_straddle_is_skipped_not_compared() {
        let mut store = ParamStore::new();
        let w = store.add_param("w", Tensor::from_f64(vec![2], &[1e-7, 0.5]).unwrap());
        let mut rng = rand::rngs::StdRng::seed_from_u64(0);
        let r = grad_check(&mut store, w, 1e-6, 2, &mut rng, |g| {
            let v = g.param(w);
            let y = g.relu(v);
            Ok(g.sum(y))
        })
        .unwrap();
        assert_eq!((r.coords_checked, r.kinks_skipped), (1, 1));
        assert!(r.max_rel_error < 1e-9);
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let mut store = ParamStore::new();
        let w = store.add_param("w", Tensor::ones(vec![2]));
        let mut rng = rand::rngs::StdRng::seed_from_u64(0);
        let r = grad_check(&mut store, w, 1e-3, 4, &mut rng, |g| Ok(g.param(w)));
        assert!(r.is_err());
    }

    #[test]
    fn linear_quadratic_is_exact() {
        let mut store = ParamStore::new();
        let w = store.add_param("w", Tensor::from_f64(vec![3, 2], &[0.1, -0.4, 0.3, 0.9, -1.2, 0.5]).unwrap());
        let x = Tensor::from_f64(vec![2, 3], &[1.0, 2.0, -1.0, 0.5, 0.0, 3.0]).unwrap();
        let mut rng = rand::rngs::StdRng::seed_from_u64(0);
        let r = grad_check(&mut store, w, DEFAULT_EPSILON, 100, &mut rng, |g| {
            let xv = g.input(x.clone());
            let wv = g.param(w);
            let y = g.linear(xv, wv)?;
            let sq = g.mul(y, y)?;
            Ok(g.sum(sq))
        })
        .unwrap();
        assert_eq!(r.coords_checked, 6);
        assert!(r.max_rel_error < 1e-6, "{r:?}");
    }
}
