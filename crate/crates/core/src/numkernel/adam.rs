//! Bias-corrected Adam.

use serde::{Deserialize, Serialize};

use super::params::{Gradients, ParamStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const DEFAULT_LEARNING_RATE: f64 = 0.002;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: DEFAULT_LEARNING_RATE,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn with_lr(lr: f64) -> Self {
        Self::new(AdamConfig {
            lr,
            ..AdamConfig::default()
        })
    }

    pub fn first_moments(&self) -> &[Tensor] {
        &self.first
    }

    pub fn second_moments(&self) -> &[Tensor] {
        &self.second
    }
}

impl Default for AdamState {
    fn default() -> Self {
        Self::new(AdamConfig::default())
    }
}

/// One Adam step over every parameter in `params`.
pub fn adam_update(params: &mut ParamStore, grads: &Gradients, state: &mut AdamState) -> Result<()> {
    if grads.len() != params.len() {
        return Err(Error::Shape(format!("{} gradients for {} parameters", grads.len(), params.len())));
    }
    for (id, p) in params.iter() {
        grads.get(id).expect_shape(p.tensor.shape())?;
    }
    if state.first.is_empty() {
        state.first = params.iter().map(|(_, p)| Tensor::zeros(p.tensor.shape())).collect();
        state.second = state.first.clone();
    } else if state.first.len() != params.len() {
        return Err(Error::Shape("optimizer state does not match parameters".into()));
    }
    state.step += 1;
    let AdamConfig {
        lr,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    let bc1 = 1.0 - beta1.powi(state.step as i32);
    let bc2 = 1.0 - beta2.powi(state.step as i32);
    let ids: Vec<_> = params.ids().collect();
    for id in ids {
        let i = id.index();
        let g = grads.get(id).data();
        let m = state.first[i].data_mut();
        let v = state.second[i].data_mut();
        let w = params.get_mut(id).data_mut();
        for j in 0..w.len() {
            m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
            v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            w[j] -= lr * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_store(v: f64) -> ParamStore {
        let mut s = ParamStore::new();
        s.add("w", Tensor::from_vec(&[1], vec![v]).unwrap());
        s
    }

    #[test]
    fn zero_gradient_is_identity() {
        let mut s = scalar_store(0.37);
        let before = s.clone();
        let g = s.zero_grads();
        let mut st = AdamState::default();
        for _ in 0..5 {
            adam_update(&mut s, &g, &mut st).unwrap();
        }
        assert_eq!(s, before);
        assert_eq!(st.step, 5);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // m̂ = g and v̂ = g², so the step is lr·g/(|g| + ε).
        for g in [0.5, -3.0] {
            let mut s = scalar_store(1.0);
            let mut grads = s.zero_grads();
            grads.get_mut(s.find("w").unwrap()).data_mut()[0] = g;
            adam_update(&mut s, &grads, &mut AdamState::default()).unwrap();
            let expected = 1.0 - 0.002 * g / (g.abs() + 1e-8);
            let got = s.get(s.find("w").unwrap()).data()[0];
            assert!((got - expected).abs() < 1e-15);
            assert!((got - (1.0 - 0.002 * g.signum())).abs() < 1e-10);
        }
    }

    #[test]
    fn deterministic() {
        let run = || {
            let mut s = scalar_store(0.1);
            let mut g = s.zero_grads();
            g.get_mut(s.find("w").unwrap()).data_mut()[0] = 0.3;
            let mut st = AdamState::default();
            adam_update(&mut s, &g, &mut st).unwrap();
            adam_update(&mut s, &g, &mut st).unwrap();
            (s, st)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn shape_mismatch() {
        let mut s = scalar_store(0.0);
        let mut other = ParamStore::new();
        other.add("w", Tensor::zeros(&[2]));
        assert!(adam_update(&mut s, &other.zero_grads(), &mut AdamState::default()).is_err());
    }
}
