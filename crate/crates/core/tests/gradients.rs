//! Finite-difference checks of every hand-written backward pass in the kernel.

use se3m::numkernel::{
    cross_entropy_loss, dense_backward, dense_forward, grad_check, layer_norm_backward, layer_norm_forward,
    mse_loss, softmax, softmax_backward, Activation, Dense, Gradients, Lstm, ParamStore, Tensor, DEFAULT_STEP,
};
use se3m::rng::RngStream;

fn uniform(shape: &[usize], rng: &mut RngStream) -> Tensor {
    Tensor::uniform(shape, 0.5, rng)
}

#[test]
fn dense_relu_matches_differences() {
    let mut rng = RngStream::new(100);
    let mut store = ParamStore::new();
    let x = store.add("x", uniform(&[3, 4], &mut rng));
    let w = store.add("w", uniform(&[4, 2], &mut rng));
    let b = store.add("b", uniform(&[2], &mut rng));
    let target = uniform(&[3, 2], &mut rng);
    let report = grad_check(&mut store, DEFAULT_STEP, |s| {
        let cache = dense_forward(s.get(x), s.get(w), s.get(b), Activation::Relu)?;
        let loss = mse_loss(&cache.output, &target)?;
        let g = dense_backward(&cache, s.get(w), &loss.gradient)?;
        let mut grads = s.zero_grads();
        *grads.get_mut(x) = g.input;
        *grads.get_mut(w) = g.weight;
        *grads.get_mut(b) = g.bias;
        Ok((loss.value, grads))
    })
    .unwrap();
    assert!(report.max_relative_error < 1e-4, "{report:?}");
    assert_eq!(report.checked, 12 + 8 + 2);
}

#[test]
fn dense_tanh_stack_with_cross_entropy() {
    let mut rng = RngStream::new(101);
    let mut store = ParamStore::new();
    let l1 = Dense::new(&mut store, "l1", 5, 6, Activation::Tanh, &mut rng);
    let l2 = Dense::new(&mut store, "l2", 6, 4, Activation::Identity, &mut rng);
    let input = uniform(&[3, 5], &mut rng);
    let classes = [0usize, 3, 1];
    let report = grad_check(&mut store, DEFAULT_STEP, |s| {
        let c1 = l1.forward(s, &input)?;
        let c2 = l2.forward(s, &c1.output)?;
        let loss = cross_entropy_loss(&c2.output, &classes)?;
        let mut grads = s.zero_grads();
        let d1 = l2.backward(s, &c2, &loss.gradient, &mut grads)?;
        l1.backward(s, &c1, &d1, &mut grads)?;
        Ok((loss.value, grads))
    })
    .unwrap();
    assert!(report.max_relative_error < 1e-4, "{report:?}");
}

#[test]
fn softmax_backward_matches_differences() {
    let mut rng = RngStream::new(102);
    let mut store = ParamStore::new();
    let z = store.add("z", uniform(&[2, 5], &mut rng));
    let weights = uniform(&[2, 5], &mut rng);
    let report = grad_check(&mut store, DEFAULT_STEP, |s| {
        let p = softmax(s.get(z));
        let loss: f64 = p.data().iter().zip(weights.data()).map(|(a, b)| a * b).sum();
        let mut grads = s.zero_grads();
        for r in 0..2 {
            softmax_backward(p.row(r), weights.row(r), grads.get_mut(z).row_mut(r));
        }
        Ok((loss, grads))
    })
    .unwrap();
    assert!(report.max_relative_error < 1e-4, "{report:?}");
}

#[test]
fn layer_norm_matches_differences() {
    let mut rng = RngStream::new(103);
    let mut store = ParamStore::new();
    let x = store.add("x", uniform(&[3, 6], &mut rng));
    let gamma = store.add("gamma", uniform(&[6], &mut rng));
    let beta = store.add("beta", uniform(&[6], &mut rng));
    let weights = uniform(&[3, 6], &mut rng);
    let report = grad_check(&mut store, DEFAULT_STEP, |s| {
        let (y, cache) = layer_norm_forward(s.get(x), s.get(gamma), s.get(beta))?;
        let loss: f64 = y.data().iter().zip(weights.data()).map(|(a, b)| a * b).sum();
        let mut grads = s.zero_grads();
        let mut dg = Tensor::zeros(&[6]);
        let mut db = Tensor::zeros(&[6]);
        let dx = layer_norm_backward(&cache, s.get(gamma), &weights, &mut dg, &mut db)?;
        *grads.get_mut(x) = dx;
        *grads.get_mut(gamma) = dg;
        *grads.get_mut(beta) = db;
        Ok((loss, grads))
    })
    .unwrap();
    assert!(report.max_relative_error < 1e-4, "{report:?}");
}

fn lstm_fragment(steps: usize, masks: Vec<Vec<bool>>, seed: u64) -> f64 {
    let mut rng = RngStream::new(seed);
    let mut store = ParamStore::new();
    let lstm = Lstm::new(&mut store, "lstm", 3, 4, &mut rng);
    for (_, p) in store.iter() {
        assert!(p.tensor.data().iter().all(|v| v.abs() <= 0.5));
    }
    let xs_ids: Vec<_> = (0..steps)
        .map(|t| store.add(format!("x{t}"), uniform(&[2, 3], &mut rng)))
        .collect();
    let head = uniform(&[2, 4], &mut rng);
    let report = grad_check(&mut store, DEFAULT_STEP, |s| {
        let xs: Vec<Tensor> = xs_ids.iter().map(|&id| s.get(id).clone()).collect();
        let (h, cache) = lstm.forward(s, &xs, &masks)?;
        let loss: f64 = h.data().iter().zip(head.data()).map(|(a, b)| a * b).sum();
        let mut grads: Gradients = s.zero_grads();
        let dxs = lstm.backward(s, &cache, &head, &mut grads)?;
        for (&id, dx) in xs_ids.iter().zip(dxs) {
            *grads.get_mut(id) = dx;
        }
        Ok((loss, grads))
    })
    .unwrap();
    report.max_relative_error
}

#[test]
fn lstm_two_steps() {
    let err = lstm_fragment(2, vec![vec![true, true]; 2], 104);
    assert!(err < 1e-4, "{err}");
}

#[test]
fn lstm_three_steps_with_masked_tail() {
    let masks = vec![vec![true, true], vec![true, false], vec![true, false]];
    let err = lstm_fragment(3, masks, 105);
    assert!(err < 1e-4, "{err}");
}

#[test]
fn corrupted_backward_is_detected() {
    let mut rng = RngStream::new(106);
    let mut store = ParamStore::new();
    let layer = Dense::new(&mut store, "l", 4, 3, Activation::Relu, &mut rng);
    let input = uniform(&[2, 4], &mut rng);
    let target = uniform(&[2, 3], &mut rng);
    let report = grad_check(&mut store, DEFAULT_STEP, |s| {
        let c = layer.forward(s, &input)?;
        let loss = mse_loss(&c.output, &target)?;
        let mut grads = s.zero_grads();
        layer.backward(s, &c, &loss.gradient, &mut grads)?;
        grads.scale(1.5);
        Ok((loss.value, grads))
    })
    .unwrap();
    assert!(report.max_relative_error > 1e-2, "{report:?}");
}
