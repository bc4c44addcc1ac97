use lidf_tensor::{conv_out_len, Graph, Mode, ParamStore, RunningStats, Tensor};
use proptest::prelude::*;

fn store() -> ParamStore<f64> {
    ParamStore::new()
}

proptest! {
    #[test]
    fn conv1d_extent_follows_floor_formula(k in 1usize..8, stride in 1usize..5, extra in 0usize..40, c in 1usize..3) {
        let len = k + extra;
        let s = store();
        let mut g = Graph::new(&s);
        let x = g.input(Tensor::ones(vec![c, len]));
        let w = g.input(Tensor::ones(vec![2, c, k]));
        let y = g.conv1d(x, w, stride).unwrap();
        prop_assert_eq!(g.shape(y), &[2, (len - k) / stride + 1]);
    }

    #[test]
    fn conv2d_extent_follows_floor_formula(
        kh in 1usize..5, kw in 1usize..5, sh in 1usize..4, sw in 1usize..4,
        ph in 0usize..3, pw in 0usize..3, h in 1usize..12, w in 1usize..12,
    ) {
        let s = store();
        let mut g = Graph::new(&s);
        let x = g.input(Tensor::ones(vec![1, h, w]));
        let k = g.input(Tensor::ones(vec![1, 1, kh, kw]));
        let expect = (conv_out_len(h, kh, sh, ph), conv_out_len(w, kw, sw, pw));
        match (g.conv2d(x, k, (sh, sw), (ph, pw)), expect) {
            (Ok(y), (Some(oh), Some(ow))) => {
                prop_assert_eq!(oh, (h + 2 * ph - kh) / sh + 1);
                prop_assert_eq!(g.shape(y), &[1, oh, ow]);
            }
            (Err(_), (a, b)) => prop_assert!(a.is_none() || b.is_none()),
            (Ok(_), _) => prop_assert!(false, "accepted an underflowing geometry"),
        }
    }

    #[test]
    fn maxpool_backward_conserves_mass_without_ties(
        raw in proptest::collection::vec(-100i32..100, 12..40), window in 1usize..5,
    ) {
        // Distinct values guarantee no ties.
        let mut vals: Vec<f64> = raw.iter().enumerate().map(|(i, &v)| v as f64 + i as f64 * 1e-3).collect();
        vals.dedup();
        let n = vals.len();
        let s = store();
        let mut g = Graph::new(&s);
        let x = g.input_with_grad(Tensor::new(vec![1, n], vals).unwrap());
        let y = g.maxpool1d(x, window, window).unwrap();
        let wts: Vec<f64> = (0..g.shape(y)[1]).map(|i| 0.5 + i as f64).collect();
        let wv = g.input(Tensor::new(vec![1, wts.len()], wts.clone()).unwrap());
        let p = g.mul(y, wv).unwrap();
        let l = g.sum(p);
        let grads = g.backward(l).unwrap();
        let dx = grads.wrt(x).unwrap();
        for (t, &gw) in wts.iter().enumerate() {
            let win: f64 = dx[t * window..(t + 1) * window].iter().sum();
            prop_assert!((win - gw).abs() < 1e-12);
        }
    }

    #[test]
    fn avgpool_backward_is_uniform(wh in 1usize..4, ww in 1usize..4, nh in 1usize..4, nw in 1usize..4) {
        let (h, w) = (wh * nh, ww * nw);
        let s = store();
        let mut g = Graph::new(&s);
        let x = g.input_with_grad(Tensor::ones(vec![2, h, w]));
        let y = g.avgpool2d(x, (wh, ww), (wh, ww)).unwrap();
        prop_assert!(g.value(y).data().iter().all(|&v| (v - 1.0).abs() < 1e-15));
        let l = g.sum(y);
        let grads = g.backward(l).unwrap();
        let expect = 1.0 / (wh * ww) as f64;
        prop_assert!(grads.wrt(x).unwrap().iter().all(|&d| (d - expect).abs() < 1e-15));
    }

    #[test]
    fn cross_entropy_is_nonnegative(
        logits in proptest::collection::vec(-30.0f64..30.0, 6), hot in 0usize..6, alpha in 0.0f64..1.0,
    ) {
        let s = store();
        let mut g = Graph::new(&s);
        let z = g.input(Tensor::new(vec![1, 6], logits).unwrap());
        let mut t = vec![0.0; 6];
        t[hot] += alpha;
        t[(hot + 1) % 6] += 1.0 - alpha;
        let l = g.softmax_cross_entropy(z, &Tensor::new(vec![1, 6], t).unwrap()).unwrap();
        prop_assert!(g.value(l).item() >= 0.0);
    }

    #[test]
    fn cross_entropy_uniform_logits_is_ln_c(c in 2usize..12, hot in 0usize..12, level in -5.0f64..5.0) {
        let s = store();
        let mut g = Graph::new(&s);
        let z = g.input(Tensor::full(vec![1, c], level));
        let mut onehot = vec![0.0; c];
        onehot[hot % c] = 1.0;
        let l = g.softmax_cross_entropy(z, &Tensor::new(vec![1, c], onehot).unwrap()).unwrap();
        prop_assert!((g.value(l).item() - (c as f64).ln()).abs() < 1e-12);
        let l = g.softmax_cross_entropy(z, &Tensor::full(vec![1, c], 1.0 / c as f64)).unwrap();
        prop_assert!((g.value(l).item() - (c as f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn batchnorm_train_output_is_standardized(
        data in proptest::collection::vec(-50.0f64..50.0, 8 * 2 * 3),
    ) {
        let mut s = store();
        let mean = s.add_buffer("m", Tensor::zeros(vec![2]));
        let var = s.add_buffer("v", Tensor::ones(vec![2]));
        let mut g = Graph::new(&s);
        let x = g.input(Tensor::new(vec![8, 2, 3], data.clone()).unwrap());
        let ga = g.input(Tensor::ones(vec![2]));
        let be = g.input(Tensor::zeros(vec![2]));
        let y = g.batchnorm(x, ga, be, RunningStats { mean, var }, Mode::Train).unwrap();
        let yd = g.value(y).data();
        for c in 0..2 {
            let vals: Vec<f64> = (0..8).flat_map(|b| (0..3).map(move |i| (b, i))).map(|(b, i)| yd[(b * 2 + c) * 3 + i]).collect();
            let xs: Vec<f64> = (0..8).flat_map(|b| (0..3).map(move |i| (b, i))).map(|(b, i)| data[(b * 2 + c) * 3 + i]).collect();
            let xm = xs.iter().sum::<f64>() / 24.0;
            let xv = xs.iter().map(|v| (v - xm).powi(2)).sum::<f64>() / 24.0;
            prop_assume!(xv > 1e-2);
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            let v = vals.iter().map(|x| (x - m).powi(2)).sum::<f64>() / vals.len() as f64;
            prop_assert!(m.abs() < 1e-4);
            prop_assert!((v - 1.0).abs() < 1e-3);
        }
    }
}
