//! Fully connected layer.

use super::activation::Activation;
use super::params::{Gradients, ParamId, ParamStore};
use super::tensor::{matmul_acc, matmul_nt_acc, matmul_tn_acc, Tensor};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Values saved by [`dense_forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct DenseCache {
    pub input: Tensor,
    pub pre: Tensor,
    pub output: Tensor,
    pub activation: Activation,
}

#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub input: Tensor,
    pub weight: Tensor,
    pub bias: Tensor,
}

/// `activation(x · W + b)` for `x[B×I]`, `W[I×O]`, `b[O]`.
pub fn dense_forward(x: &Tensor, weight: &Tensor, bias: &Tensor, activation: Activation) -> Result<DenseCache> {
    let (batch, inputs) = (x.rows(), x.cols());
    if weight.shape().len() != 2 || weight.shape()[0] != inputs {
        return Err(Error::Shape(format!(
            "dense input {:?} against weight {:?}",
            x.shape(),
            weight.shape()
        )));
    }
    let outputs = weight.shape()[1];
    if bias.len() != outputs {
        return Err(Error::Shape(format!("bias {:?} for {outputs} outputs", bias.shape())));
    }
    let mut pre = Tensor::zeros(&[batch, outputs]);
    for i in 0..batch {
        pre.row_mut(i).copy_from_slice(bias.data());
    }
    matmul_acc(x.data(), weight.data(), pre.data_mut(), batch, inputs, outputs);
    let mut output = pre.clone();
    output.data_mut().iter_mut().for_each(|v| *v = activation.apply(*v));
    Ok(DenseCache {
        input: x.clone(),
        pre,
        output,
        activation,
    })
}

pub fn dense_backward(cache: &DenseCache, weight: &Tensor, d_output: &Tensor) -> Result<DenseGrads> {
    d_output.expect_shape(cache.output.shape())?;
    let (batch, inputs) = (cache.input.rows(), cache.input.cols());
    let outputs = weight.shape()[1];
    let mut d_pre = d_output.clone();
    for ((d, &x), &y) in d_pre
        .data_mut()
        .iter_mut()
        .zip(cache.pre.data())
        .zip(cache.output.data())
    {
        *d *= cache.activation.derivative(x, y);
    }
    let mut d_weight = Tensor::zeros(&[inputs, outputs]);
    matmul_tn_acc(cache.input.data(), d_pre.data(), d_weight.data_mut(), batch, inputs, outputs);
    let mut d_bias = Tensor::zeros(&[outputs]);
    for i in 0..batch {
        for (b, &d) in d_bias.data_mut().iter_mut().zip(d_pre.row(i)) {
            *b += d;
        }
    }
    let mut d_input = Tensor::zeros(&[batch, inputs]);
    matmul_nt_acc(d_pre.data(), weight.data(), d_input.data_mut(), batch, outputs, inputs);
    Ok(DenseGrads {
        input: d_input,
        weight: d_weight,
        bias: d_bias,
    })
}

/// A dense layer whose weights live in a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dense {
    pub weight: ParamId,
    pub bias: ParamId,
    pub activation: Activation,
    pub inputs: usize,
    pub outputs: usize,
}

impl Dense {
    /// Weights and bias uniform in `±1/√inputs`.
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        inputs: usize,
        outputs: usize,
        activation: Activation,
        rng: &mut RngStream,
    ) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let weight = store.add(format!("{name}.weight"), Tensor::uniform(&[inputs, outputs], bound, rng));
        let bias = store.add(format!("{name}.bias"), Tensor::uniform(&[outputs], bound, rng));
        Self {
            weight,
            bias,
            activation,
            inputs,
            outputs,
        }
    }

    pub fn forward(&self, store: &ParamStore, x: &Tensor) -> Result<DenseCache> {
        dense_forward(x, store.get(self.weight), store.get(self.bias), self.activation)
    }

    /// Accumulates weight/bias gradients and returns the input gradient.
    pub fn backward(
        &self,
        store: &ParamStore,
        cache: &DenseCache,
        d_output: &Tensor,
        grads: &mut Gradients,
    ) -> Result<Tensor> {
        let g = dense_backward(cache, store.get(self.weight), d_output)?;
        grads.get_mut(self.weight).add_assign(&g.weight)?;
        grads.get_mut(self.bias).add_assign(&g.bias)?;
        Ok(g.input)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_layer_gives_zero() {
        let x = Tensor::filled(&[2, 3], 0.7);
        let c = dense_forward(&x, &Tensor::zeros(&[3, 4]), &Tensor::zeros(&[4]), Activation::Relu).unwrap();
        assert!(c.output.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_layer_passes_through() {
        let x = Tensor::from_vec(&[2, 3], vec![1., -2., 3., 0.5, 0., -1.]).unwrap();
        let mut w = Tensor::zeros(&[3, 3]);
        for i in 0..3 {
            w.row_mut(i)[i] = 1.0;
        }
        let c = dense_forward(&x, &w, &Tensor::zeros(&[3]), Activation::Identity).unwrap();
        assert_eq!(c.output, x);
    }

    #[test]
    fn shape_mismatch() {
        let x = Tensor::zeros(&[2, 3]);
        assert!(dense_forward(&x, &Tensor::zeros(&[4, 2]), &Tensor::zeros(&[2]), Activation::Relu).is_err());
        assert!(dense_forward(&x, &Tensor::zeros(&[3, 2]), &Tensor::zeros(&[3]), Activation::Relu).is_err());
    }
}
