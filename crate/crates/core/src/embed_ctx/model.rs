//! Bidirectional post-norm transformer encoder with masked-token and
//! next-sentence heads, forward and backward written out by hand.

use std::path::Path;

use super::config::TransformerConfig;
use super::pretrain_data::PretrainExample;
use super::wordpiece::WordPieceVocab;
use crate::error::{Error, Result};
use crate::numkernel::{
    dot, layer_norm_backward, layer_norm_forward, matmul_acc, matmul_nt_acc, matmul_tn_acc, Activation, Checkpoint,
    Gradients, LayerNormCache, ParamId, ParamStore, Tensor,
};
use crate::rng::RngStream;

/// Standard deviation of freshly initialized weights.
pub const INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, Copy)]
enum Init {
    Weight,
    Zeros,
    Ones,
}

#[derive(Debug, Clone)]
struct LayerIds {
    q_w: ParamId,
    q_b: ParamId,
    k_w: ParamId,
    k_b: ParamId,
    v_w: ParamId,
    v_b: ParamId,
    o_w: ParamId,
    o_b: ParamId,
    ln1_g: ParamId,
    ln1_b: ParamId,
    ff1_w: ParamId,
    ff1_b: ParamId,
    ff2_w: ParamId,
    ff2_b: ParamId,
    ln2_g: ParamId,
    ln2_b: ParamId,
}

#[derive(Debug, Clone)]
struct ModelIds {
    token: ParamId,
    position: ParamId,
    segment: ParamId,
    emb_ln_g: ParamId,
    emb_ln_b: ParamId,
    layers: Vec<LayerIds>,
    mlm_w: ParamId,
    mlm_b: ParamId,
    mlm_ln_g: ParamId,
    mlm_ln_b: ParamId,
    mlm_bias: ParamId,
    pool_w: ParamId,
    pool_b: ParamId,
    nsp_w: ParamId,
    nsp_b: ParamId,
}

impl ModelIds {
    fn build(c: &TransformerConfig, mut add: impl FnMut(&str, &[usize], Init) -> Result<ParamId>) -> Result<Self> {
        let (h, f, v) = (c.hidden, c.intermediate, c.vocab_size);
        let token = add("embeddings.token", &[v, h], Init::Weight)?;
        let position = add("embeddings.position", &[c.max_seq_len, h], Init::Weight)?;
        let segment = add("embeddings.segment", &[2, h], Init::Weight)?;
        let emb_ln_g = add("embeddings.norm.gamma", &[h], Init::Ones)?;
        let emb_ln_b = add("embeddings.norm.beta", &[h], Init::Zeros)?;
        let mut layers = Vec::with_capacity(c.layers);
        for l in 0..c.layers {
            let mut p = |name: &str, shape: &[usize], init| add(&format!("layer{l}.{name}"), shape, init);
            layers.push(LayerIds {
                q_w: p("attention.query.weight", &[h, h], Init::Weight)?,
                q_b: p("attention.query.bias", &[h], Init::Zeros)?,
                k_w: p("attention.key.weight", &[h, h], Init::Weight)?,
                k_b: p("attention.key.bias", &[h], Init::Zeros)?,
                v_w: p("attention.value.weight", &[h, h], Init::Weight)?,
                v_b: p("attention.value.bias", &[h], Init::Zeros)?,
                o_w: p("attention.output.weight", &[h, h], Init::Weight)?,
                o_b: p("attention.output.bias", &[h], Init::Zeros)?,
                ln1_g: p("attention.norm.gamma", &[h], Init::Ones)?,
                ln1_b: p("attention.norm.beta", &[h], Init::Zeros)?,
                ff1_w: p("ffn.inner.weight", &[h, f], Init::Weight)?,
                ff1_b: p("ffn.inner.bias", &[f], Init::Zeros)?,
                ff2_w: p("ffn.outer.weight", &[f, h], Init::Weight)?,
                ff2_b: p("ffn.outer.bias", &[h], Init::Zeros)?,
                ln2_g: p("ffn.norm.gamma", &[h], Init::Ones)?,
                ln2_b: p("ffn.norm.beta", &[h], Init::Zeros)?,
            });
        }
        Ok(Self {
            token,
            position,
            segment,
            emb_ln_g,
            emb_ln_b,
            layers,
            mlm_w: add("mlm.transform.weight", &[h, h], Init::Weight)?,
            mlm_b: add("mlm.transform.bias", &[h], Init::Zeros)?,
            mlm_ln_g: add("mlm.norm.gamma", &[h], Init::Ones)?,
            mlm_ln_b: add("mlm.norm.beta", &[h], Init::Zeros)?,
            mlm_bias: add("mlm.decoder.bias", &[v], Init::Zeros)?,
            pool_w: add("nsp.pooler.weight", &[h, h], Init::Weight)?,
            pool_b: add("nsp.pooler.bias", &[h], Init::Zeros)?,
            nsp_w: add("nsp.classifier.weight", &[h, 2], Init::Weight)?,
            nsp_b: add("nsp.classifier.bias", &[2], Init::Zeros)?,
        })
    }
}

/// `x[T×I] · w[I×O] + b`.
fn linear(x: &Tensor, w: &Tensor, b: &Tensor) -> Tensor {
    let (t, i, o) = (x.rows(), x.cols(), b.len());
    let mut out = Tensor::zeros(&[t, o]);
    for r in 0..t {
        out.row_mut(r).copy_from_slice(b.data());
    }
    matmul_acc(x.data(), w.data(), out.data_mut(), t, i, o);
    out
}

/// Accumulates weight and bias gradients and returns the input gradient.
fn linear_backward(x: &Tensor, w: &Tensor, dy: &Tensor, dw: &mut Tensor, db: &mut Tensor) -> Tensor {
    let (t, i, o) = (x.rows(), x.cols(), dy.cols());
    matmul_tn_acc(x.data(), dy.data(), dw.data_mut(), t, i, o);
    for r in 0..t {
        for (b, &d) in db.data_mut().iter_mut().zip(dy.row(r)) {
            *b += d;
        }
    }
    let mut dx = Tensor::zeros(&[t, i]);
    matmul_nt_acc(dy.data(), w.data(), dx.data_mut(), t, o, i);
    dx
}

/// Inverted dropout in place; returns the per-element scale for backward.
fn dropout(x: &mut Tensor, rate: f64, rng: Option<&mut RngStream>) -> Option<Vec<f64>> {
    let rng = rng?;
    if rate <= 0.0 {
        return None;
    }
    let keep = 1.0 / (1.0 - rate);
    let scale: Vec<f64> = (0..x.len())
        .map(|_| if rng.next_f64() < rate { 0.0 } else { keep })
        .collect();
    for (v, s) in x.data_mut().iter_mut().zip(&scale) {
        *v *= s;
    }
    Some(scale)
}

fn apply_scale(d: &mut Tensor, scale: &Option<Vec<f64>>) {
    if let Some(s) = scale {
        for (v, s) in d.data_mut().iter_mut().zip(s) {
            *v *= s;
        }
    }
}

struct LayerCache {
    x: Tensor,
    q: Tensor,
    k: Tensor,
    v: Tensor,
    probs: Vec<f64>,
    ctx: Tensor,
    drop_attn: Option<Vec<f64>>,
    ln1: LayerNormCache,
    h1: Tensor,
    u: Tensor,
    f: Tensor,
    drop_ffn: Option<Vec<f64>>,
    ln2: LayerNormCache,
}

struct EncoderCache {
    ids: Vec<u32>,
    segments: Vec<u8>,
    real: Vec<usize>,
    emb_ln: LayerNormCache,
    drop_emb: Option<Vec<f64>>,
    layers: Vec<LayerCache>,
    /// Embedding sum followed by the output of every encoder layer.
    outputs: Vec<Tensor>,
}

/// Per-example objective values and prediction counts.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ExampleLoss {
    /// Summed cross-entropy over masked positions.
    pub mlm_sum: f64,
    pub mlm_count: usize,
    pub mlm_correct: usize,
    pub nsp: f64,
    pub nsp_correct: bool,
}

/// Layer layout of a transformer. Methods take the parameter store
/// explicitly.
#[derive(Debug, Clone)]
pub struct Encoder {
    config: TransformerConfig,
    ids: ModelIds,
}

impl Encoder {
    pub fn config(&self) -> &TransformerConfig {
        &self.config
    }

    /// Registers freshly initialized parameters in a new store.
    pub fn init(config: &TransformerConfig) -> Result<(Self, ParamStore)> {
        config.validate()?;
        let mut store = ParamStore::new();
        let mut rng = RngStream::new(config.seed);
        let bound = INIT_STD * 3f64.sqrt();
        let ids = ModelIds::build(config, |name, shape, init| {
            let t = match init {
                Init::Weight => Tensor::uniform(shape, bound, &mut rng),
                Init::Zeros => Tensor::zeros(shape),
                Init::Ones => Tensor::filled(shape, 1.0),
            };
            Ok(store.add(name, t))
        })?;
        Ok((
            Self {
                config: config.clone(),
                ids,
            },
            store,
        ))
    }

    /// Binds to an existing store, checking every name and shape.
    pub fn bind(config: &TransformerConfig, store: &ParamStore) -> Result<Self> {
        config.validate()?;
        let mut bound = 0usize;
        let ids = ModelIds::build(config, |name, shape, _| {
            bound += 1;
            let id = store
                .find(name)
                .ok_or_else(|| Error::Checkpoint(format!("missing tensor `{name}`")))?;
            if store.get(id).shape() != shape {
                return Err(Error::Checkpoint(format!(
                    "tensor `{name}` has shape {:?}, expected {shape:?}",
                    store.get(id).shape()
                )));
            }
            Ok(id)
        })?;
        if store.len() != bound {
            return Err(Error::Checkpoint("unexpected extra tensors for this configuration".into()));
        }
        Ok(Self {
            config: config.clone(),
            ids,
        })
    }

    fn check_input(&self, ids: &[u32], segments: &[u8], mask: &[bool]) -> Result<()> {
        let t = ids.len();
        if t == 0 {
            return Err(Error::EmptyInput);
        }
        if t > self.config.max_seq_len {
            return Err(Error::SequenceTooLong {
                len: t,
                max: self.config.max_seq_len,
            });
        }
        if segments.len() != t {
            return Err(Error::LengthMismatch(t, segments.len()));
        }
        if mask.len() != t {
            return Err(Error::LengthMismatch(t, mask.len()));
        }
        if !mask.iter().any(|&m| m) {
            return Err(Error::EmptyInput);
        }
        if let Some(&bad) = ids.iter().find(|&&i| i as usize >= self.config.vocab_size) {
            return Err(Error::Config(format!("token id {bad} outside vocabulary")));
        }
        if segments.iter().any(|&s| s > 1) {
            return Err(Error::Config("segment ids must be 0 or 1".into()));
        }
        Ok(())
    }

    fn forward(
        &self,
        p: &ParamStore,
        ids: &[u32],
        segments: &[u8],
        mask: &[bool],
        mut rng: Option<&mut RngStream>,
    ) -> Result<EncoderCache> {
        self.check_input(ids, segments, mask)?;
        let c = &self.config;
        let (t, h) = (ids.len(), c.hidden);
        let mut sum = Tensor::zeros(&[t, h]);
        for (r, (&id, &s)) in ids.iter().zip(segments).enumerate() {
            let row = sum.row_mut(r);
            let tok = p.get(self.ids.token).row(id as usize);
            let pos = p.get(self.ids.position).row(r);
            let seg = p.get(self.ids.segment).row(s as usize);
            for j in 0..h {
                row[j] = tok[j] + pos[j] + seg[j];
            }
        }
        let (mut x, emb_ln) = layer_norm_forward(&sum, p.get(self.ids.emb_ln_g), p.get(self.ids.emb_ln_b))?;
        let drop_emb = dropout(&mut x, c.dropout, rng.as_deref_mut());
        let real: Vec<usize> = (0..t).filter(|&j| mask[j]).collect();
        let mut outputs = Vec::with_capacity(c.layers + 1);
        outputs.push(sum);
        let mut layers = Vec::with_capacity(c.layers);
        for lid in &self.ids.layers {
            let cache = self.layer_forward(p, lid, x, &real, rng.as_deref_mut())?;
            x = cache.1;
            outputs.push(x.clone());
            layers.push(cache.0);
        }
        Ok(EncoderCache {
            ids: ids.to_vec(),
            segments: segments.to_vec(),
            real,
            emb_ln,
            drop_emb,
            layers,
            outputs,
        })
    }

    fn layer_forward(
        &self,
        p: &ParamStore,
        l: &LayerIds,
        x: Tensor,
        real: &[usize],
        mut rng: Option<&mut RngStream>,
    ) -> Result<(LayerCache, Tensor)> {
        let c = &self.config;
        let (t, h, heads, dh) = (x.rows(), c.hidden, c.heads, c.head_dim());
        let scale = 1.0 / (dh as f64).sqrt();
        let q = linear(&x, p.get(l.q_w), p.get(l.q_b));
        let k = linear(&x, p.get(l.k_w), p.get(l.k_b));
        let v = linear(&x, p.get(l.v_w), p.get(l.v_b));
        let mut probs = vec![0.0; heads * t * t];
        let mut ctx = Tensor::zeros(&[t, h]);
        for a in 0..heads {
            let off = a * dh;
            for i in 0..t {
                let qi = &q.row(i)[off..off + dh];
                let prow = &mut probs[(a * t + i) * t..(a * t + i + 1) * t];
                let mut max = f64::NEG_INFINITY;
                for &j in real {
                    let s = dot(qi, &k.row(j)[off..off + dh]) * scale;
                    prow[j] = s;
                    max = max.max(s);
                }
                let mut total = 0.0;
                for &j in real {
                    prow[j] = (prow[j] - max).exp();
                    total += prow[j];
                }
                let ci = &mut ctx.row_mut(i)[off..off + dh];
                for &j in real {
                    prow[j] /= total;
                    let pj = prow[j];
                    for (cv, &vv) in ci.iter_mut().zip(&v.row(j)[off..off + dh]) {
                        *cv += pj * vv;
                    }
                }
            }
        }
        let mut attn = linear(&ctx, p.get(l.o_w), p.get(l.o_b));
        let drop_attn = dropout(&mut attn, c.dropout, rng.as_deref_mut());
        attn.add_assign(&x)?;
        let (h1, ln1) = layer_norm_forward(&attn, p.get(l.ln1_g), p.get(l.ln1_b))?;
        let u = linear(&h1, p.get(l.ff1_w), p.get(l.ff1_b));
        let mut f = u.clone();
        f.data_mut().iter_mut().for_each(|v| *v = Activation::Gelu.apply(*v));
        let mut g = linear(&f, p.get(l.ff2_w), p.get(l.ff2_b));
        let drop_ffn = dropout(&mut g, c.dropout, rng.as_deref_mut());
        g.add_assign(&h1)?;
        let (out, ln2) = layer_norm_forward(&g, p.get(l.ln2_g), p.get(l.ln2_b))?;
        Ok((
            LayerCache {
                x,
                q,
                k,
                v,
                probs,
                ctx,
                drop_attn,
                ln1,
                h1,
                u,
                f,
                drop_ffn,
                ln2,
            },
            out,
        ))
    }

    fn layer_backward(
        &self,
        p: &ParamStore,
        l: &LayerIds,
        cache: &LayerCache,
        real: &[usize],
        d_out: &Tensor,
        g: &mut Gradients,
    ) -> Result<Tensor> {
        let c = &self.config;
        let (t, heads, dh) = (cache.x.rows(), c.heads, c.head_dim());
        let scale = 1.0 / (dh as f64).sqrt();
        let d_r2 = {
            let (dg, db) = two_mut(g, l.ln2_g, l.ln2_b);
            layer_norm_backward(&cache.ln2, p.get(l.ln2_g), d_out, dg, db)?
        };
        let mut d_h1 = d_r2.clone();
        let mut d_g = d_r2;
        apply_scale(&mut d_g, &cache.drop_ffn);
        let mut d_f = {
            let (dw, db) = two_mut(g, l.ff2_w, l.ff2_b);
            linear_backward(&cache.f, p.get(l.ff2_w), &d_g, dw, db)
        };
        for (d, &u) in d_f.data_mut().iter_mut().zip(cache.u.data()) {
            *d *= Activation::Gelu.derivative(u, 0.0);
        }
        let d_h1_ffn = {
            let (dw, db) = two_mut(g, l.ff1_w, l.ff1_b);
            linear_backward(&cache.h1, p.get(l.ff1_w), &d_f, dw, db)
        };
        d_h1.add_assign(&d_h1_ffn)?;
        let d_r1 = {
            let (dg, db) = two_mut(g, l.ln1_g, l.ln1_b);
            layer_norm_backward(&cache.ln1, p.get(l.ln1_g), &d_h1, dg, db)?
        };
        let mut d_x = d_r1.clone();
        let mut d_attn = d_r1;
        apply_scale(&mut d_attn, &cache.drop_attn);
        let d_ctx = {
            let (dw, db) = two_mut(g, l.o_w, l.o_b);
            linear_backward(&cache.ctx, p.get(l.o_w), &d_attn, dw, db)
        };
        let mut d_q = Tensor::zeros(cache.q.shape());
        let mut d_k = Tensor::zeros(cache.k.shape());
        let mut d_v = Tensor::zeros(cache.v.shape());
        let mut d_p = vec![0.0; t];
        for a in 0..heads {
            let off = a * dh;
            for i in 0..t {
                let prow = &cache.probs[(a * t + i) * t..(a * t + i + 1) * t];
                let dci = &d_ctx.row(i)[off..off + dh];
                let mut inner = 0.0;
                for &j in real {
                    d_p[j] = dot(dci, &cache.v.row(j)[off..off + dh]);
                    inner += prow[j] * d_p[j];
                    let pj = prow[j];
                    for (dv, &dc) in d_v.row_mut(j)[off..off + dh].iter_mut().zip(dci) {
                        *dv += pj * dc;
                    }
                }
                let qi = &cache.q.row(i)[off..off + dh];
                for &j in real {
                    let ds = prow[j] * (d_p[j] - inner) * scale;
                    if ds == 0.0 {
                        continue;
                    }
                    let kj = &cache.k.row(j)[off..off + dh];
                    for (dq, &kv) in d_q.row_mut(i)[off..off + dh].iter_mut().zip(kj) {
                        *dq += ds * kv;
                    }
                    for (dk, &qv) in d_k.row_mut(j)[off..off + dh].iter_mut().zip(qi) {
                        *dk += ds * qv;
                    }
                }
            }
        }
        for (dy, w, b) in [(&d_q, l.q_w, l.q_b), (&d_k, l.k_w, l.k_b), (&d_v, l.v_w, l.v_b)] {
            let (dw, db) = two_mut(g, w, b);
            let dx = linear_backward(&cache.x, p.get(w), dy, dw, db);
            d_x.add_assign(&dx)?;
        }
        Ok(d_x)
    }

    /// Backward from gradients on the final layer output into every
    /// encoder and embedding parameter.
    fn encoder_backward(&self, p: &ParamStore, cache: &EncoderCache, d_top: Tensor, g: &mut Gradients) -> Result<()> {
        let mut d = d_top;
        for (lid, lc) in self.ids.layers.iter().zip(&cache.layers).rev() {
            d = self.layer_backward(p, lid, lc, &cache.real, &d, g)?;
        }
        apply_scale(&mut d, &cache.drop_emb);
        let d_sum = {
            let (dg, db) = two_mut(g, self.ids.emb_ln_g, self.ids.emb_ln_b);
            layer_norm_backward(&cache.emb_ln, p.get(self.ids.emb_ln_g), &d, dg, db)?
        };
        for (r, (&id, &s)) in cache.ids.iter().zip(&cache.segments).enumerate() {
            let dr = d_sum.row(r);
            for (targets, row) in [
                (self.ids.token, id as usize),
                (self.ids.position, r),
                (self.ids.segment, s as usize),
            ] {
                for (o, &v) in g.get_mut(targets).row_mut(row).iter_mut().zip(dr) {
                    *o += v;
                }
            }
        }
        Ok(())
    }

    /// All `L + 1` layer representations of one sequence, without dropout.
    pub fn encode(&self, p: &ParamStore, ids: &[u32], segments: &[u8], mask: &[bool]) -> Result<Vec<Tensor>> {
        Ok(self.forward(p, ids, segments, mask, None)?.outputs)
    }

    /// Joint masked-token and next-sentence loss of one example. When
    /// `grads` is given, adds `mlm_weight · ∂ΣCE_mlm + nsp_weight · ∂CE_nsp`.
    pub fn example_loss(
        &self,
        p: &ParamStore,
        ex: &PretrainExample,
        rng: Option<&mut RngStream>,
        grads: Option<(&mut Gradients, f64, f64)>,
    ) -> Result<ExampleLoss> {
        let mask = vec![true; ex.len()];
        let cache = self.forward(p, &ex.ids, &ex.segments, &mask, rng)?;
        let top = cache.outputs.last().expect("at least one layer");
        let (h, vsize) = (self.config.hidden, self.config.vocab_size);
        let m = ex.masked_positions.len();
        let mut out = ExampleLoss {
            mlm_count: m,
            ..Default::default()
        };

        let mut sel = Tensor::zeros(&[m, h]);
        for (r, &pos) in ex.masked_positions.iter().enumerate() {
            if pos >= ex.len() {
                return Err(Error::Config(format!("masked position {pos} beyond sequence")));
            }
            sel.row_mut(r).copy_from_slice(top.row(pos));
        }
        let pre = linear(&sel, p.get(self.ids.mlm_w), p.get(self.ids.mlm_b));
        let mut act = pre.clone();
        act.data_mut().iter_mut().for_each(|v| *v = Activation::Gelu.apply(*v));
        let (normed, mlm_ln) = layer_norm_forward(&act, p.get(self.ids.mlm_ln_g), p.get(self.ids.mlm_ln_b))?;
        let mut logits = Tensor::zeros(&[m, vsize]);
        for r in 0..m {
            logits.row_mut(r).copy_from_slice(p.get(self.ids.mlm_bias).data());
        }
        matmul_nt_acc(normed.data(), p.get(self.ids.token).data(), logits.data_mut(), m, h, vsize);
        let mut d_logits = Tensor::zeros(&[m, vsize]);
        for (r, &label) in ex.masked_labels.iter().enumerate() {
            let label = label as usize;
            if label >= vsize {
                return Err(Error::ClassOutOfRange {
                    index: label,
                    classes: vsize,
                });
            }
            let row = logits.row(r);
            let (ce, argmax) = softmax_ce(row, label, d_logits.row_mut(r));
            out.mlm_sum += ce;
            out.mlm_correct += usize::from(argmax == label);
        }

        let cls = Tensor::from_vec(&[1, h], top.row(0).to_vec())?;
        let pre_pool = linear(&cls, p.get(self.ids.pool_w), p.get(self.ids.pool_b));
        let mut pooled = pre_pool.clone();
        pooled.data_mut().iter_mut().for_each(|v| *v = v.tanh());
        let nsp_logits = linear(&pooled, p.get(self.ids.nsp_w), p.get(self.ids.nsp_b));
        let mut d_nsp = Tensor::zeros(&[1, 2]);
        let label = ex.nsp_class();
        let (ce, argmax) = softmax_ce(nsp_logits.row(0), label, d_nsp.row_mut(0));
        out.nsp = ce;
        out.nsp_correct = argmax == label;

        let Some((g, mlm_weight, nsp_weight)) = grads else {
            return Ok(out);
        };
        let mut d_top = Tensor::zeros(top.shape());

        d_logits.scale(mlm_weight);
        {
            let db = g.get_mut(self.ids.mlm_bias);
            for r in 0..m {
                for (o, &v) in db.data_mut().iter_mut().zip(d_logits.row(r)) {
                    *o += v;
                }
            }
        }
        matmul_tn_acc(d_logits.data(), normed.data(), g.get_mut(self.ids.token).data_mut(), m, vsize, h);
        let mut d_normed = Tensor::zeros(&[m, h]);
        matmul_acc(d_logits.data(), p.get(self.ids.token).data(), d_normed.data_mut(), m, vsize, h);
        let mut d_act = {
            let (dg, db) = two_mut(g, self.ids.mlm_ln_g, self.ids.mlm_ln_b);
            layer_norm_backward(&mlm_ln, p.get(self.ids.mlm_ln_g), &d_normed, dg, db)?
        };
        for (d, &x) in d_act.data_mut().iter_mut().zip(pre.data()) {
            *d *= Activation::Gelu.derivative(x, 0.0);
        }
        let d_sel = {
            let (dw, db) = two_mut(g, self.ids.mlm_w, self.ids.mlm_b);
            linear_backward(&sel, p.get(self.ids.mlm_w), &d_act, dw, db)
        };
        for (r, &pos) in ex.masked_positions.iter().enumerate() {
            for (o, &v) in d_top.row_mut(pos).iter_mut().zip(d_sel.row(r)) {
                *o += v;
            }
        }

        d_nsp.scale(nsp_weight);
        let mut d_pooled = {
            let (dw, db) = two_mut(g, self.ids.nsp_w, self.ids.nsp_b);
            linear_backward(&pooled, p.get(self.ids.nsp_w), &d_nsp, dw, db)
        };
        for (d, &y) in d_pooled.data_mut().iter_mut().zip(pooled.data()) {
            *d *= 1.0 - y * y;
        }
        let d_cls = {
            let (dw, db) = two_mut(g, self.ids.pool_w, self.ids.pool_b);
            linear_backward(&cls, p.get(self.ids.pool_w), &d_pooled, dw, db)
        };
        for (o, &v) in d_top.row_mut(0).iter_mut().zip(d_cls.row(0)) {
            *o += v;
        }

        self.encoder_backward(p, &cache, d_top, g)?;
        Ok(out)
    }
}

/// Cross-entropy of one logit row; writes `softmax − onehot` into `grad`.
fn softmax_ce(logits: &[f64], label: usize, grad: &mut [f64]) -> (f64, usize) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    let mut argmax = 0;
    for (j, (&z, g)) in logits.iter().zip(grad.iter_mut()).enumerate() {
        *g = (z - max).exp();
        total += *g;
        if z > logits[argmax] {
            argmax = j;
        }
    }
    for g in grad.iter_mut() {
        *g /= total;
    }
    let loss = -(logits[label] - max - total.ln());
    grad[label] -= 1.0;
    (loss, argmax)
}

fn two_mut(g: &mut Gradients, a: ParamId, b: ParamId) -> (&mut Tensor, &mut Tensor) {
    g.pair_mut(a, b)
}

/// An encoder with its parameters and WordPiece vocabulary.
#[derive(Debug, Clone)]
pub struct TransformerModel {
    pub(crate) encoder: Encoder,
    pub(crate) params: ParamStore,
    pub(crate) vocab: WordPieceVocab,
}

pub const VOCAB_SECTION: &str = "vocab.txt";
pub const CONFIG_METADATA: &str = "transformer_config";
pub const KIND_METADATA: &str = "model_kind";
pub const KIND: &str = "contextual";

impl TransformerModel {
    /// Fresh model; `config.vocab_size` is set from `vocab`.
    pub fn new(mut config: TransformerConfig, vocab: WordPieceVocab) -> Result<Self> {
        config.vocab_size = vocab.len();
        let (encoder, params) = Encoder::init(&config)?;
        Ok(Self { encoder, params, vocab })
    }

    pub fn config(&self) -> &TransformerConfig {
        self.encoder.config()
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn vocab(&self) -> &WordPieceVocab {
        &self.vocab
    }

    /// Per-layer token representations `[(L + 1) × T × H]` with segment 0
    /// everywhere. `attention_mask[j] == false` hides position `j` as a key.
    pub fn encode(&self, ids: &[u32], attention_mask: &[bool]) -> Result<Vec<Tensor>> {
        self.encode_with_segments(ids, &vec![0; ids.len()], attention_mask)
    }

    pub fn encode_with_segments(&self, ids: &[u32], segments: &[u8], attention_mask: &[bool]) -> Result<Vec<Tensor>> {
        self.encoder.encode(&self.params, ids, segments, attention_mask)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint::new(self.params.clone())
            .with_section(VOCAB_SECTION, self.vocab.to_text().into_bytes())
            .with_metadata(CONFIG_METADATA, self.config().to_json())
            .with_metadata(KIND_METADATA, KIND)
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self> {
        let config_text = ckpt
            .metadata
            .get(CONFIG_METADATA)
            .ok_or_else(|| Error::Checkpoint(format!("missing `{CONFIG_METADATA}` metadata")))?;
        let config = TransformerConfig::from_json(config_text)?;
        let vocab = WordPieceVocab::from_text(ckpt.section_text(VOCAB_SECTION)?)?;
        if vocab.len() != config.vocab_size {
            return Err(Error::Checkpoint(format!(
                "vocabulary has {} pieces but the config expects {}",
                vocab.len(),
                config.vocab_size
            )));
        }
        let encoder = Encoder::bind(&config, &ckpt.params)?;
        Ok(Self {
            encoder,
            params: ckpt.params,
            vocab,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(Checkpoint::load(path)?)
    }
}
