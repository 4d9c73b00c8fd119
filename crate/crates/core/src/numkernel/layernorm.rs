//! Row-wise layer normalization.

use super::tensor::Tensor;
use crate::error::Result;

pub const LAYER_NORM_EPS: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct LayerNormCache {
    normalized: Tensor,
    inv_std: Vec<f64>,
}

/// `γ ⊙ (x − μ) / σ + β` over the last dimension of `x[R×D]`.
pub fn layer_norm_forward(x: &Tensor, gamma: &Tensor, beta: &Tensor) -> Result<(Tensor, LayerNormCache)> {
    let d = x.cols();
    gamma.expect_shape(&[d])?;
    beta.expect_shape(&[d])?;
    let mut normalized = x.clone();
    let mut out = x.clone();
    let mut inv_std = Vec::with_capacity(x.rows());
    for r in 0..x.rows() {
        let row = x.row(r);
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d as f64;
        let is = 1.0 / (var + LAYER_NORM_EPS).sqrt();
        inv_std.push(is);
        let n_row = normalized.row_mut(r);
        for (n, &v) in n_row.iter_mut().zip(row) {
            *n = (v - mean) * is;
        }
        let o_row = out.row_mut(r);
        for j in 0..d {
            o_row[j] = gamma.data()[j] * normalized.row(r)[j] + beta.data()[j];
        }
    }
    Ok((out, LayerNormCache { normalized, inv_std }))
}

/// Returns `dx` and accumulates into `d_gamma`, `d_beta`.
pub fn layer_norm_backward(
    cache: &LayerNormCache,
    gamma: &Tensor,
    d_out: &Tensor,
    d_gamma: &mut Tensor,
    d_beta: &mut Tensor,
) -> Result<Tensor> {
    d_out.expect_shape(cache.normalized.shape())?;
    let d = d_out.cols();
    let mut dx = Tensor::zeros(d_out.shape());
    for r in 0..d_out.rows() {
        let dy = d_out.row(r);
        let xhat = cache.normalized.row(r);
        let mut sum_dxhat = 0.0;
        let mut sum_dxhat_xhat = 0.0;
        for j in 0..d {
            d_gamma.data_mut()[j] += dy[j] * xhat[j];
            d_beta.data_mut()[j] += dy[j];
            let dxh = dy[j] * gamma.data()[j];
            sum_dxhat += dxh;
            sum_dxhat_xhat += dxh * xhat[j];
        }
        let scale = cache.inv_std[r] / d as f64;
        let dx_row = dx.row_mut(r);
        for j in 0..d {
            let dxh = dy[j] * gamma.data()[j];
            dx_row[j] = scale * (d as f64 * dxh - sum_dxhat - xhat[j] * sum_dxhat_xhat);
        }
    }
    Ok(dx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizes_rows() {
        let x = Tensor::from_vec(&[2, 4], vec![1., 2., 3., 4., -5., 0., 5., 10.]).unwrap();
        let (y, _) = layer_norm_forward(&x, &Tensor::filled(&[4], 1.0), &Tensor::zeros(&[4])).unwrap();
        for r in 0..2 {
            let mean: f64 = y.row(r).iter().sum::<f64>() / 4.0;
            let var: f64 = y.row(r).iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-9);
        }
    }
}
