use crate::error::{Result, TensorError};
use crate::scalar::Scalar;
use crate::store::ParamStore;

/// In-place parameter update; clears every gradient afterwards.
pub trait Optimizer<T: Scalar> {
    fn step(&mut self, store: &mut ParamStore<T>) -> Result<()>;
}

fn ensure_grads<T: Scalar>(store: &ParamStore<T>) -> Result<()> {
    for p in store.params() {
        if p.tensor.requires_grad() && p.tensor.grad().is_none() {
            return Err(TensorError::InvalidState(format!(
                "parameter `{}` has no gradient; run backward before stepping",
                p.name
            )));
        }
    }
    Ok(())
}

/// Stochastic gradient descent with heavy-ball momentum: `v ← μv + g; p ← p − lr·v`.
#[derive(Debug, Clone)]
pub struct Sgd<T> {
    pub lr: T,
    pub momentum: T,
    velocity: Vec<Vec<T>>,
}

impl<T: Scalar> Sgd<T> {
    pub fn new(lr: T, momentum: T) -> Self {
        Self { lr, momentum, velocity: Vec::new() }
    }
}

impl<T: Scalar> Optimizer<T> for Sgd<T> {
    fn step(&mut self, store: &mut ParamStore<T>) -> Result<()> {
        ensure_grads(store)?;
        let params = store.params_mut();
        self.velocity.resize_with(params.len(), Vec::new);
        for (p, vel) in params.iter_mut().zip(&mut self.velocity) {
            if !p.tensor.requires_grad() {
                continue;
            }
            let (data, grad) = p.tensor.data_and_grad_mut();
            let grad = grad.expect("checked");
            if vel.is_empty() {
                vel.resize(data.len(), T::zero());
            }
            for ((w, v), &g) in data.iter_mut().zip(vel.iter_mut()).zip(grad.iter()) {
                *v = self.momentum * *v + g;
                *w = *w - self.lr * *v;
            }
            p.tensor.clear_grad();
        }
        Ok(())
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    t: i32,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(lr: T, beta1: T, beta2: T, eps: T) -> Self {
        Self { lr, beta1, beta2, eps, t: 0, m: Vec::new(), v: Vec::new() }
    }

    /// lr 1e-3, betas (0.9, 0.999), eps 1e-8.
    pub fn with_lr(lr: T) -> Self {
        Self::new(lr, T::lit(0.9), T::lit(0.999), T::lit(1e-8))
    }

    pub fn steps_taken(&self) -> i32 {
        self.t
    }
}

impl<T: Scalar> Default for Adam<T> {
    fn default() -> Self {
        Self::with_lr(T::lit(1e-3))
    }
}

impl<T: Scalar> Optimizer<T> for Adam<T> {
    fn step(&mut self, store: &mut ParamStore<T>) -> Result<()> {
        ensure_grads(store)?;
        self.t += 1;
        let bc1 = T::one() - self.beta1.powi(self.t);
        let bc2 = T::one() - self.beta2.powi(self.t);
        let params = store.params_mut();
        self.m.resize_with(params.len(), Vec::new);
        self.v.resize_with(params.len(), Vec::new);
        for ((p, m), v) in params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            if !p.tensor.requires_grad() {
                continue;
            }
            let (data, grad) = p.tensor.data_and_grad_mut();
            let grad = grad.expect("checked");
            if m.is_empty() {
                m.resize(data.len(), T::zero());
                v.resize(data.len(), T::zero());
            }
            for i in 0..data.len() {
                let g = grad[i];
                m[i] = self.beta1 * m[i] + (T::one() - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (T::one() - self.beta2) * g * g;
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                data[i] = data[i] - self.lr * mhat / (vhat.sqrt() + self.eps);
            }
            p.tensor.clear_grad();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn scalar_store(v: f64, g: Option<f64>) -> (ParamStore<f64>, crate::ParamId) {
        let mut s = ParamStore::new();
        let id = s.add_param("w", Tensor::scalar(v));
        if let Some(g) = g {
            s.param_mut(id).accumulate_grad(&[g]).unwrap();
        }
        (s, id)
    }

    #[test]
    fn sgd_single_step() {
        let (mut s, id) = scalar_store(0.0, Some(1.0));
        Sgd::new(0.1, 0.9).step(&mut s).unwrap();
        assert!((s.param(id).item() + 0.1).abs() < 1e-15);
        assert!(s.param(id).grad().is_none());
    }

    #[test]
    fn sgd_momentum_accumulates() {
        let (mut s, id) = scalar_store(0.0, Some(1.0));
        let mut opt = Sgd::new(0.1, 0.5);
        opt.step(&mut s).unwrap();
        s.param_mut(id).accumulate_grad(&[1.0]).unwrap();
        opt.step(&mut s).unwrap();
        // v1 = 1, v2 = 1.5
        assert!((s.param(id).item() + 0.25).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_is_lr_times_sign() {
        for g in [3.7, -0.02, 1e3] {
            let (mut s, id) = scalar_store(1.0, Some(g));
            Adam::default().step(&mut s).unwrap();
            let moved = s.param(id).item() - 1.0;
            assert!((moved + 1e-3 * g.signum()).abs() < 1e-6, "g={g} moved={moved}");
        }
    }

    #[test]
    fn zero_gradient_leaves_parameter() {
        let (mut s, id) = scalar_store(2.5, Some(0.0));
        Adam::default().step(&mut s).unwrap();
        assert_eq!(s.param(id).item(), 2.5);
        let (mut s, id) = scalar_store(2.5, Some(0.0));
        Sgd::new(0.1, 0.9).step(&mut s).unwrap();
        assert_eq!(s.param(id).item(), 2.5);
    }

    #[test]
    fn missing_gradient_is_invalid_state() {
        let (mut s, _) = scalar_store(0.0, None);
        assert!(matches!(Adam::<f64>::default().step(&mut s), Err(TensorError::InvalidState(_))));
        assert!(matches!(Sgd::new(0.1, 0.0).step(&mut s), Err(TensorError::InvalidState(_))));
    }
}
