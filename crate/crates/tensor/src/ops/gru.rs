//! Gated recurrent unit, composed from primitive graph ops so that
//! backpropagation through time falls out of the tape.
//!
//! Gate order inside the `3H` projections is (reset, update, candidate):
//!
//! ```text
//! r = σ(x·Wxr + h·Whr)
//! z = σ(x·Wxz + h·Whz)
//! n = tanh(x·Wxn + r ⊙ (h·Whn))
//! h' = (1 − z) ⊙ n + z ⊙ h
//! ```
//!
//! No bias terms; the initial hidden state is zero.

use crate::error::{ensure_arg, Result};
use crate::graph::{Graph, Var};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Weights of one direction: `w_input: [F, 3H]`, `w_hidden: [H, 3H]`.
#[derive(Debug, Clone, Copy)]
pub struct GruWeights {
    pub w_input: Var,
    pub w_hidden: Var,
}

impl<'p, T: Scalar> Graph<'p, T> {
    /// Runs one direction over `[B, T, F]`; returns the hidden state of every
    /// step (each `[B, H]`) in input time order.
    pub fn gru(&mut self, x: Var, weights: GruWeights, hidden: usize, reverse: bool) -> Result<Vec<Var>> {
        ensure_arg!(hidden > 0, "GRU hidden size must be positive");
        let xs = self.shape(x).to_vec();
        ensure_arg!(xs.len() == 3, "GRU input must be [B, T, F], got {xs:?}");
        let (batch, steps, feats) = (xs[0], xs[1], xs[2]);
        ensure_arg!(
            self.shape(weights.w_input) == [feats, 3 * hidden],
            "GRU input weight must be [{feats}, {}], got {:?}",
            3 * hidden,
            self.shape(weights.w_input)
        );
        ensure_arg!(
            self.shape(weights.w_hidden) == [hidden, 3 * hidden],
            "GRU hidden weight must be [{hidden}, {}], got {:?}",
            3 * hidden,
            self.shape(weights.w_hidden)
        );
        let projected = self.matmul(x, weights.w_input)?;
        let mut h = self.input(Tensor::zeros(vec![batch, hidden]));
        let mut outputs = vec![h; steps];
        let order: Vec<usize> = if reverse { (0..steps).rev().collect() } else { (0..steps).collect() };
        for t in order {
            let xt = self.select(projected, 1, t)?;
            let hp = self.matmul(h, weights.w_hidden)?;
            let gate = |g: &mut Self, k: usize| -> Result<(Var, Var)> {
                Ok((g.narrow(xt, 1, k * hidden, hidden)?, g.narrow(hp, 1, k * hidden, hidden)?))
            };
            let (xr, hr) = gate(self, 0)?;
            let (xz, hz) = gate(self, 1)?;
            let (xn, hn) = gate(self, 2)?;
            let r = self.add(xr, hr)?;
            let r = self.sigmoid(r);
            let z = self.add(xz, hz)?;
            let z = self.sigmoid(z);
            let rh = self.mul(r, hn)?;
            let n = self.add(xn, rh)?;
            let n = self.tanh(n);
            let diff = self.sub(h, n)?;
            let zd = self.mul(z, diff)?;
            h = self.add(n, zd)?;
            outputs[t] = h;
        }
        Ok(outputs)
    }

    /// Bidirectional GRU over `[B, T, F]` (or `[T, F]`), returning
    /// `[B, T, 2H]` (or `[T, 2H]`) with forward states first on the last axis.
    pub fn bigru(&mut self, x: Var, forward: GruWeights, backward: GruWeights, hidden: usize) -> Result<Var> {
        ensure_arg!(hidden > 0, "GRU hidden size must be positive");
        let xs = self.shape(x).to_vec();
        ensure_arg!(xs.len() == 2 || xs.len() == 3, "bigru expects [T, F] or [B, T, F], got {xs:?}");
        let batched = xs.len() == 3;
        let xb = if batched { x } else { self.reshape(x, vec![1, xs[0], xs[1]])? };
        let fwd = self.gru(xb, forward, hidden, false)?;
        let bwd = self.gru(xb, backward, hidden, true)?;
        let steps = fwd
            .iter()
            .zip(&bwd)
            .map(|(&f, &b)| self.concat(&[f, b], 1))
            .collect::<Result<Vec<_>>>()?;
        let out = self.stack(&steps, 1)?;
        if batched {
            Ok(out)
        } else {
            self.reshape(out, vec![xs[0], 2 * hidden])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::ParamStore;

    fn sig(v: f64) -> f64 {
        1.0 / (1.0 + (-v).exp())
    }

    #[test]
    fn zero_weights_and_input_stay_at_zero() {
        let mut store = ParamStore::<f64>::new();
        let ids: Vec<_> = ["fi", "fh", "bi", "bh"]
            .iter()
            .zip([vec![3, 6], vec![2, 6], vec![3, 6], vec![2, 6]])
            .map(|(n, s)| store.add_param(*n, Tensor::zeros(s)))
            .collect();
        let mut g = Graph::new(&store);
        let w: Vec<Var> = ids.iter().map(|&i| g.param(i)).collect();
        let x = g.input(Tensor::zeros(vec![4, 3]));
        let y = g
            .bigru(x, GruWeights { w_input: w[0], w_hidden: w[1] }, GruWeights { w_input: w[2], w_hidden: w[3] }, 2)
            .unwrap();
        assert_eq!(g.shape(y), &[4, 4]);
        assert!(g.value(y).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_step_scalar_closed_form() {
        // F = H = 1, one timestep, h0 = 0 so hidden weights drop out.
        let (x, wr, wz, wn) = (0.8, 0.5, -1.0, 2.0);
        let r = sig(wr * x);
        let z = sig(wz * x);
        let n = (wn * x + r * 0.0).tanh();
        let expect = (1.0 - z) * n;

        let mut store = ParamStore::<f64>::new();
        let wi = store.add_param("wi", Tensor::from_f64(vec![1, 3], &[wr, wz, wn]).unwrap());
        let wh = store.add_param("wh", Tensor::from_f64(vec![1, 3], &[0.3, 0.3, 0.3]).unwrap());
        let mut g = Graph::new(&store);
        let w = GruWeights { w_input: g.param(wi), w_hidden: g.param(wh) };
        let xv = g.input(Tensor::from_f64(vec![1, 1, 1], &[x]).unwrap());
        let hs = g.gru(xv, w, 1, false).unwrap();
        assert!((g.value(hs[0]).item() - expect).abs() < 1e-15);
    }

    #[test]
    fn two_steps_match_manual_recurrence() {
        let (wr, wz, wn) = (0.4, -0.3, 0.9);
        let (ur, uz, un) = (0.2, 0.7, -0.5);
        let xs = [1.0, -0.5];
        let mut h = 0.0;
        let mut manual = Vec::new();
        for &x in &xs {
            let r = sig(wr * x + ur * h);
            let z = sig(wz * x + uz * h);
            let n = (wn * x + r * (un * h)).tanh();
            h = (1.0 - z) * n + z * h;
            manual.push(h);
        }
        let mut store = ParamStore::<f64>::new();
        let wi = store.add_param("wi", Tensor::from_f64(vec![1, 3], &[wr, wz, wn]).unwrap());
        let wh = store.add_param("wh", Tensor::from_f64(vec![1, 3], &[ur, uz, un]).unwrap());
        let mut g = Graph::new(&store);
        let w = GruWeights { w_input: g.param(wi), w_hidden: g.param(wh) };
        let xv = g.input(Tensor::from_f64(vec![1, 2, 1], &xs).unwrap());
        let hs = g.gru(xv, w, 1, false).unwrap();
        for (v, m) in hs.iter().zip(&manual) {
            assert!((g.value(*v).item() - m).abs() < 1e-14);
        }
        // Reverse direction consumes x[1] first.
        let hr = g.gru(xv, w, 1, true).unwrap();
        let r = sig(wr * xs[1]);
        let z = sig(wz * xs[1]);
        let n = (wn * xs[1] + r * 0.0).tanh();
        assert!((g.value(hr[1]).item() - (1.0 - z) * n).abs() < 1e-14);
    }

    #[test]
    fn rejects_zero_hidden() {
        let store = ParamStore::<f64>::new();
        let mut g = Graph::new(&store);
        let x = g.input(Tensor::zeros(vec![2, 3]));
        let w = g.input(Tensor::zeros(vec![3, 3]));
        let gw = GruWeights { w_input: w, w_hidden: w };
        assert!(g.bigru(x, gw, gw, 0).is_err());
    }
}
