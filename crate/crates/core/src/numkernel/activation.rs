//! Element-wise activations and the row softmax.

use serde::{Deserialize, Serialize};

use super::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    Sigmoid,
    /// Tanh approximation of the Gaussian error linear unit.
    Gelu,
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
            Activation::Gelu => 0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh()),
        }
    }

    /// Derivative at pre-activation `x`, given the activation output `y`.
    pub fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Gelu => {
                let inner = GELU_C * (x + 0.044715 * x * x * x);
                let t = inner.tanh();
                0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
            }
        }
    }
}

/// Softmax of one row, stabilized by subtracting the row maximum.
pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Row-wise softmax of a `[B×C]` tensor.
pub fn softmax(logits: &Tensor) -> Tensor {
    let mut out = logits.clone();
    for i in 0..out.rows() {
        softmax_in_place(out.row_mut(i));
    }
    out
}

/// Backward of a row softmax: `dx = p ⊙ (dp − ⟨dp, p⟩)`.
pub fn softmax_backward(probs: &[f64], dprobs: &[f64], dlogits: &mut [f64]) {
    let inner: f64 = probs.iter().zip(dprobs).map(|(p, d)| p * d).sum();
    for ((dx, &p), &dp) in dlogits.iter_mut().zip(probs).zip(dprobs) {
        *dx += p * (dp - inner);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn uniform_logits() {
        let p = softmax(&Tensor::zeros(&[1, 3]));
        for &v in p.data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn large_offsets_do_not_overflow() {
        let x = 12.5;
        let p = softmax(&Tensor::from_vec(&[1, 2], vec![x, x + 1000.0]).unwrap());
        assert!(p.data()[0] < 1e-300);
        assert!((p.data()[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rows_sum_to_one() {
        let mut rng = RngStream::new(11);
        let logits = Tensor::uniform(&[50, 9], 30.0, &mut rng);
        let p = softmax(&logits);
        for i in 0..50 {
            let s: f64 = p.row(i).iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
            assert!(p.row(i).iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn derivatives_match_differences() {
        let h = 1e-6;
        for act in [Activation::Tanh, Activation::Sigmoid, Activation::Gelu, Activation::Identity] {
            for &x in &[-2.0, -0.3, 0.4, 1.7] {
                let numeric = (act.apply(x + h) - act.apply(x - h)) / (2.0 * h);
                let analytic = act.derivative(x, act.apply(x));
                assert!((numeric - analytic).abs() < 1e-7, "{act:?} at {x}");
            }
        }
    }
}
