//! LSTM cell with per-row masking and backpropagation through time.
//!
//! Gate pre-activations are laid out as four `H`-wide column blocks in the
//! order input, forget, candidate, output. A row whose mask entry is `false`
//! (a pad position) carries `h` and `c` through the step untouched.

use super::activation::sigmoid;
use super::params::{Gradients, ParamId, ParamStore};
use super::tensor::{matmul_acc, matmul_nt_acc, matmul_tn_acc, Tensor};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Borrowed LSTM weights: `w_x[I×4H]`, `w_h[H×4H]`, `bias[4H]`.
#[derive(Debug, Clone, Copy)]
pub struct LstmWeights<'a> {
    pub w_x: &'a Tensor,
    pub w_h: &'a Tensor,
    pub bias: &'a Tensor,
}

impl LstmWeights<'_> {
    fn hidden(&self) -> usize {
        self.w_h.shape()[0]
    }

    fn check(&self, x: &Tensor, h: &Tensor, c: &Tensor, mask: &[bool]) -> Result<()> {
        let hid = self.hidden();
        let batch = x.rows();
        let ok = self.w_h.shape() == [hid, 4 * hid]
            && self.w_x.shape().len() == 2
            && self.w_x.shape()[0] == x.cols()
            && self.w_x.shape()[1] == 4 * hid
            && self.bias.len() == 4 * hid
            && h.shape() == [batch, hid]
            && c.shape() == [batch, hid]
            && mask.len() == batch;
        if ok {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "lstm step x {:?} h {:?} c {:?} w_x {:?} w_h {:?} mask {}",
                x.shape(),
                h.shape(),
                c.shape(),
                self.w_x.shape(),
                self.w_h.shape(),
                mask.len()
            )))
        }
    }
}

#[derive(Debug, Clone)]
pub struct LstmStepCache {
    x: Tensor,
    h_prev: Tensor,
    c_prev: Tensor,
    /// Activated gates `[B×4H]`.
    gates: Tensor,
    tanh_c: Tensor,
    mask: Vec<bool>,
}

/// One step. Returns `(h', c')` and the cache for [`lstm_step_backward`].
pub fn lstm_step(
    x: &Tensor,
    h: &Tensor,
    c: &Tensor,
    mask: &[bool],
    w: LstmWeights<'_>,
) -> Result<(Tensor, Tensor, LstmStepCache)> {
    w.check(x, h, c, mask)?;
    let hid = w.hidden();
    let batch = x.rows();
    let mut gates = Tensor::zeros(&[batch, 4 * hid]);
    for b in 0..batch {
        gates.row_mut(b).copy_from_slice(w.bias.data());
    }
    matmul_acc(x.data(), w.w_x.data(), gates.data_mut(), batch, x.cols(), 4 * hid);
    matmul_acc(h.data(), w.w_h.data(), gates.data_mut(), batch, hid, 4 * hid);

    let mut h_next = h.clone();
    let mut c_next = c.clone();
    let mut tanh_c = Tensor::zeros(&[batch, hid]);
    for b in 0..batch {
        let g = gates.row_mut(b);
        for j in 0..hid {
            g[j] = sigmoid(g[j]);
            g[hid + j] = sigmoid(g[hid + j]);
            g[2 * hid + j] = g[2 * hid + j].tanh();
            g[3 * hid + j] = sigmoid(g[3 * hid + j]);
        }
        if !mask[b] {
            continue;
        }
        let g = gates.row(b);
        let c_prev = c.row(b);
        let c_row = c_next.row_mut(b);
        for j in 0..hid {
            c_row[j] = g[hid + j] * c_prev[j] + g[j] * g[2 * hid + j];
        }
        let t_row = tanh_c.row_mut(b);
        for j in 0..hid {
            t_row[j] = c_next.row(b)[j].tanh();
        }
        let h_row = h_next.row_mut(b);
        for j in 0..hid {
            h_row[j] = g[3 * hid + j] * tanh_c.row(b)[j];
        }
    }
    let cache = LstmStepCache {
        x: x.clone(),
        h_prev: h.clone(),
        c_prev: c.clone(),
        gates,
        tanh_c,
        mask: mask.to_vec(),
    };
    Ok((h_next, c_next, cache))
}

/// Gradients of one step with respect to its inputs and weights.
#[derive(Debug, Clone)]
pub struct LstmStepGrads {
    pub x: Tensor,
    pub h_prev: Tensor,
    pub c_prev: Tensor,
    pub w_x: Tensor,
    pub w_h: Tensor,
    pub bias: Tensor,
}

pub fn lstm_step_backward(
    cache: &LstmStepCache,
    w: LstmWeights<'_>,
    d_h: &Tensor,
    d_c: &Tensor,
) -> Result<LstmStepGrads> {
    let hid = w.hidden();
    let batch = cache.x.rows();
    let inputs = cache.x.cols();
    d_h.expect_shape(&[batch, hid])?;
    d_c.expect_shape(&[batch, hid])?;

    let mut d_gates = Tensor::zeros(&[batch, 4 * hid]);
    let mut d_h_prev = Tensor::zeros(&[batch, hid]);
    let mut d_c_prev = Tensor::zeros(&[batch, hid]);
    for b in 0..batch {
        if !cache.mask[b] {
            d_h_prev.row_mut(b).copy_from_slice(d_h.row(b));
            d_c_prev.row_mut(b).copy_from_slice(d_c.row(b));
            continue;
        }
        let g = cache.gates.row(b);
        let tc = cache.tanh_c.row(b);
        let c_prev = cache.c_prev.row(b);
        let dg = d_gates.row_mut(b);
        for j in 0..hid {
            let (i, f, cand, o) = (g[j], g[hid + j], g[2 * hid + j], g[3 * hid + j]);
            let dh = d_h.row(b)[j];
            let dc = d_c.row(b)[j] + dh * o * (1.0 - tc[j] * tc[j]);
            dg[j] = dc * cand * i * (1.0 - i);
            dg[hid + j] = dc * c_prev[j] * f * (1.0 - f);
            dg[2 * hid + j] = dc * i * (1.0 - cand * cand);
            dg[3 * hid + j] = dh * tc[j] * o * (1.0 - o);
            d_c_prev.row_mut(b)[j] = dc * f;
        }
    }
    let mut d_x = Tensor::zeros(&[batch, inputs]);
    matmul_nt_acc(d_gates.data(), w.w_x.data(), d_x.data_mut(), batch, 4 * hid, inputs);
    matmul_nt_acc(d_gates.data(), w.w_h.data(), d_h_prev.data_mut(), batch, 4 * hid, hid);
    let mut d_wx = Tensor::zeros(&[inputs, 4 * hid]);
    matmul_tn_acc(cache.x.data(), d_gates.data(), d_wx.data_mut(), batch, inputs, 4 * hid);
    let mut d_wh = Tensor::zeros(&[hid, 4 * hid]);
    matmul_tn_acc(cache.h_prev.data(), d_gates.data(), d_wh.data_mut(), batch, hid, 4 * hid);
    let mut d_bias = Tensor::zeros(&[4 * hid]);
    for b in 0..batch {
        for (db, &dg) in d_bias.data_mut().iter_mut().zip(d_gates.row(b)) {
            *db += dg;
        }
    }
    Ok(LstmStepGrads {
        x: d_x,
        h_prev: d_h_prev,
        c_prev: d_c_prev,
        w_x: d_wx,
        w_h: d_wh,
        bias: d_bias,
    })
}

/// An LSTM layer over whole sequences, weights held in a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lstm {
    pub w_x: ParamId,
    pub w_h: ParamId,
    pub bias: ParamId,
    pub inputs: usize,
    pub hidden: usize,
}

#[derive(Debug, Clone)]
pub struct LstmCache {
    steps: Vec<LstmStepCache>,
}

impl Lstm {
    /// Weights and biases uniform in `±1/√hidden`.
    pub fn new(store: &mut ParamStore, name: &str, inputs: usize, hidden: usize, rng: &mut RngStream) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let w_x = store.add(format!("{name}.w_x"), Tensor::uniform(&[inputs, 4 * hidden], bound, rng));
        let w_h = store.add(format!("{name}.w_h"), Tensor::uniform(&[hidden, 4 * hidden], bound, rng));
        let bias = store.add(format!("{name}.bias"), Tensor::uniform(&[4 * hidden], bound, rng));
        Self {
            w_x,
            w_h,
            bias,
            inputs,
            hidden,
        }
    }

    pub fn weights<'a>(&self, store: &'a ParamStore) -> LstmWeights<'a> {
        LstmWeights {
            w_x: store.get(self.w_x),
            w_h: store.get(self.w_h),
            bias: store.get(self.bias),
        }
    }

    /// Runs `xs[t]` (`[B×I]` each) from a zero state; returns the final `h`.
    pub fn forward(&self, store: &ParamStore, xs: &[Tensor], masks: &[Vec<bool>]) -> Result<(Tensor, LstmCache)> {
        if xs.len() != masks.len() {
            return Err(Error::Shape(format!("{} steps but {} masks", xs.len(), masks.len())));
        }
        let batch = xs.first().map_or(0, Tensor::rows);
        let w = self.weights(store);
        let mut h = Tensor::zeros(&[batch, self.hidden]);
        let mut c = Tensor::zeros(&[batch, self.hidden]);
        let mut steps = Vec::with_capacity(xs.len());
        for (x, m) in xs.iter().zip(masks) {
            let (h2, c2, cache) = lstm_step(x, &h, &c, m, w)?;
            h = h2;
            c = c2;
            steps.push(cache);
        }
        Ok((h, LstmCache { steps }))
    }

    /// Backpropagates a gradient on the final `h`; returns per-step input gradients.
    pub fn backward(
        &self,
        store: &ParamStore,
        cache: &LstmCache,
        d_h_last: &Tensor,
        grads: &mut Gradients,
    ) -> Result<Vec<Tensor>> {
        let w = self.weights(store);
        let mut d_h = d_h_last.clone();
        let mut d_c = Tensor::zeros(d_h_last.shape());
        let mut d_xs = vec![Tensor::zeros(&[0]); cache.steps.len()];
        for (t, step) in cache.steps.iter().enumerate().rev() {
            let g = lstm_step_backward(step, w, &d_h, &d_c)?;
            grads.get_mut(self.w_x).add_assign(&g.w_x)?;
            grads.get_mut(self.w_h).add_assign(&g.w_h)?;
            grads.get_mut(self.bias).add_assign(&g.bias)?;
            d_h = g.h_prev;
            d_c = g.c_prev;
            d_xs[t] = g.x;
        }
        Ok(d_xs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_zero_state() {
        let x = Tensor::filled(&[2, 3], 0.9);
        let h = Tensor::zeros(&[2, 4]);
        let c = Tensor::zeros(&[2, 4]);
        let wx = Tensor::zeros(&[3, 16]);
        let wh = Tensor::zeros(&[4, 16]);
        let b = Tensor::zeros(&[16]);
        let w = LstmWeights {
            w_x: &wx,
            w_h: &wh,
            bias: &b,
        };
        let (h2, c2, _) = lstm_step(&x, &h, &c, &[true, true], w).unwrap();
        assert!(h2.data().iter().all(|&v| v == 0.0));
        assert!(c2.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn masked_rows_keep_state() {
        let mut rng = RngStream::new(5);
        let x = Tensor::uniform(&[2, 3], 1.0, &mut rng);
        let h = Tensor::uniform(&[2, 4], 1.0, &mut rng);
        let c = Tensor::uniform(&[2, 4], 1.0, &mut rng);
        let wx = Tensor::uniform(&[3, 16], 0.5, &mut rng);
        let wh = Tensor::uniform(&[4, 16], 0.5, &mut rng);
        let b = Tensor::uniform(&[16], 0.5, &mut rng);
        let w = LstmWeights {
            w_x: &wx,
            w_h: &wh,
            bias: &b,
        };
        let (h2, c2, _) = lstm_step(&x, &h, &c, &[false, true], w).unwrap();
        assert_eq!(h2.row(0), h.row(0));
        assert_eq!(c2.row(0), c.row(0));
        assert_ne!(h2.row(1), h.row(1));
    }

    #[test]
    fn shape_mismatch() {
        let x = Tensor::zeros(&[2, 3]);
        let h = Tensor::zeros(&[2, 4]);
        let wx = Tensor::zeros(&[5, 16]);
        let wh = Tensor::zeros(&[4, 16]);
        let b = Tensor::zeros(&[16]);
        let w = LstmWeights {
            w_x: &wx,
            w_h: &wh,
            bias: &b,
        };
        assert!(lstm_step(&x, &h, &h, &[true, true], w).is_err());
    }

    #[test]
    fn trailing_pads_equal_unpadded() {
        let mut rng = RngStream::new(9);
        let mut store = ParamStore::new();
        let lstm = Lstm::new(&mut store, "lstm", 3, 5, &mut rng);
        let xs: Vec<Tensor> = (0..4).map(|_| Tensor::uniform(&[1, 3], 1.0, &mut rng)).collect();
        let (h_short, _) = lstm.forward(&store, &xs[..2], &[vec![true], vec![true]]).unwrap();
        let masks = vec![vec![true], vec![true], vec![false], vec![false]];
        let (h_padded, _) = lstm.forward(&store, &xs, &masks).unwrap();
        assert_eq!(h_short, h_padded);
    }
}
