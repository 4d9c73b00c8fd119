//! The estimation head: optional LSTM, dense stack and output layer.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{HeadConfig, InputMode, OutputKind};
use crate::corpus::{BucketScheme, PLANNING_POKER};
use crate::error::{Error, Result};
use crate::numkernel::{softmax_in_place, Activation, Checkpoint, Dense, DenseCache, Gradients, Lstm, LstmCache, ParamStore, Tensor};
use crate::rng::RngStream;

pub const MIN_EFFORT: f64 = 1.0;
pub const MAX_EFFORT: f64 = 100.0;

/// Requirement features produced by an embedding model.
#[derive(Debug, Clone, PartialEq)]
pub enum Representation {
    /// `T × d` token vectors, `T ≥ 1`.
    Sequence(Tensor),
    Pooled(Vec<f64>),
}

impl Representation {
    pub fn mode(&self) -> InputMode {
        match self {
            Representation::Sequence(_) => InputMode::Sequence,
            Representation::Pooled(_) => InputMode::Pooled,
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            Representation::Sequence(t) => t.cols(),
            Representation::Pooled(v) => v.len(),
        }
    }

    fn steps(&self) -> usize {
        match self {
            Representation::Sequence(t) => t.rows(),
            Representation::Pooled(_) => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Static,
    Contextual,
}

/// Which embedding model and reduction produced the inputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceDescriptor {
    pub kind: SourceKind,
    pub fine_tuned: bool,
    /// Content hash or name of the embedding model.
    pub identity: String,
    pub pooling: String,
}

impl std::fmt::Display for SourceDescriptor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self.kind {
            SourceKind::Static => "static",
            SourceKind::Contextual => "contextual",
        };
        let stage = if self.fine_tuned { "fine-tuned" } else { "base" };
        write!(f, "{kind} {stage}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionResult {
    /// Model output clamped to `[1, 100]`.
    pub effort: f64,
    /// Planning-Poker class of the prediction.
    pub class: f64,
    /// Unclamped output (softmax heads report the predicted class value).
    pub raw: f64,
    pub probabilities: Option<Vec<f64>>,
}

/// Clamps `raw` into `[1, 100]` and attaches its bucket.
pub fn prediction_from_raw(raw: f64) -> Result<PredictionResult> {
    if !raw.is_finite() {
        return Err(Error::NonFinite("estimator output".into()));
    }
    let effort = raw.clamp(MIN_EFFORT, MAX_EFFORT);
    Ok(PredictionResult {
        effort,
        class: BucketScheme::planning_poker().bucketize(effort)?,
        raw,
        probabilities: None,
    })
}

/// First index of the largest value, so ties go to the lowest bucket.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub(crate) struct HeadCache {
    lstm: Option<LstmCache>,
    dense: Vec<DenseCache>,
    output: DenseCache,
}

#[derive(Debug, Clone)]
pub struct EstimatorModel {
    config: HeadConfig,
    input_dim: usize,
    source: SourceDescriptor,
    pub(crate) params: ParamStore,
    lstm: Option<Lstm>,
    dense: Vec<Dense>,
    output: Dense,
    /// Free-form provenance stored with checkpoints.
    pub metadata: BTreeMap<String, String>,
}

/// Initializes a head for `input_dim`-dimensional representations.
pub fn build_estimator(config: &HeadConfig, input_dim: usize, source: SourceDescriptor) -> Result<EstimatorModel> {
    config.validate()?;
    if input_dim == 0 {
        return Err(Error::Config("input dimension must be at least 1".into()));
    }
    let mut rng = RngStream::new(config.seed);
    let mut params = ParamStore::new();
    let (lstm, mut width) = match config.input {
        InputMode::Sequence => (
            Some(Lstm::new(&mut params, "lstm", input_dim, config.lstm_hidden, &mut rng)),
            config.lstm_hidden,
        ),
        InputMode::Pooled => (None, input_dim),
    };
    let mut dense = Vec::with_capacity(config.dense.len());
    for (i, &size) in config.dense.iter().enumerate() {
        dense.push(Dense::new(&mut params, &format!("dense{i}"), width, size, config.activation, &mut rng));
        width = size;
    }
    let outputs = match config.output {
        OutputKind::Linear => 1,
        OutputKind::Softmax => PLANNING_POKER.len(),
    };
    let output = Dense::new(&mut params, "output", width, outputs, Activation::Identity, &mut rng);
    Ok(EstimatorModel {
        config: config.clone(),
        input_dim,
        source,
        params,
        lstm,
        dense,
        output,
        metadata: BTreeMap::new(),
    })
}

impl EstimatorModel {
    pub fn config(&self) -> &HeadConfig {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn source(&self) -> &SourceDescriptor {
        &self.source
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn output_size(&self) -> usize {
        self.output.outputs
    }

    pub fn num_parameters(&self) -> usize {
        self.params.num_scalars()
    }

    pub(crate) fn check(&self, rep: &Representation) -> Result<()> {
        if rep.mode() != self.config.input {
            return Err(Error::Config(format!(
                "{} representation given to a {} head",
                rep.mode(),
                self.config.input
            )));
        }
        if rep.dimension() != self.input_dim {
            return Err(Error::Shape(format!(
                "representation dimension {} but the head expects {}",
                rep.dimension(),
                self.input_dim
            )));
        }
        if rep.steps() == 0 {
            return Err(Error::EmptyInput);
        }
        Ok(())
    }

    /// Raw outputs `[B × outputs]` for a batch. Sequences shorter than the
    /// longest one are padded with masked steps.
    pub(crate) fn forward(&self, params: &ParamStore, batch: &[&Representation]) -> Result<(Tensor, HeadCache)> {
        for rep in batch {
            self.check(rep)?;
        }
        let b = batch.len();
        let (mut x, lstm_cache) = match &self.lstm {
            Some(lstm) => {
                let steps = batch.iter().map(|r| r.steps()).max().unwrap_or(0);
                let mut xs = vec![Tensor::zeros(&[b, self.input_dim]); steps];
                let mut masks = vec![vec![false; b]; steps];
                for (i, rep) in batch.iter().enumerate() {
                    if let Representation::Sequence(seq) = rep {
                        for t in 0..seq.rows() {
                            xs[t].row_mut(i).copy_from_slice(seq.row(t));
                            masks[t][i] = true;
                        }
                    }
                }
                let (h, cache) = lstm.forward(params, &xs, &masks)?;
                (h, Some(cache))
            }
            None => {
                let mut x = Tensor::zeros(&[b, self.input_dim]);
                for (i, rep) in batch.iter().enumerate() {
                    if let Representation::Pooled(v) = rep {
                        x.row_mut(i).copy_from_slice(v);
                    }
                }
                (x, None)
            }
        };
        let mut dense_caches = Vec::with_capacity(self.dense.len());
        for layer in &self.dense {
            let cache = layer.forward(params, &x)?;
            x = cache.output.clone();
            dense_caches.push(cache);
        }
        let out = self.output.forward(params, &x)?;
        Ok((
            out.output.clone(),
            HeadCache {
                lstm: lstm_cache,
                dense: dense_caches,
                output: out,
            },
        ))
    }

    pub(crate) fn backward(&self, params: &ParamStore, cache: &HeadCache, d_out: &Tensor, grads: &mut Gradients) -> Result<()> {
        let mut d = self.output.backward(params, &cache.output, d_out, grads)?;
        for (layer, c) in self.dense.iter().zip(&cache.dense).rev() {
            d = layer.backward(params, c, &d, grads)?;
        }
        if let (Some(lstm), Some(c)) = (&self.lstm, &cache.lstm) {
            lstm.backward(params, c, &d, grads)?;
        }
        Ok(())
    }

    fn result_from_row(&self, row: &[f64]) -> Result<PredictionResult> {
        match self.config.output {
            OutputKind::Linear => prediction_from_raw(row[0]),
            OutputKind::Softmax => {
                let mut probs = row.to_vec();
                softmax_in_place(&mut probs);
                let class = PLANNING_POKER[argmax_lowest(&probs)];
                Ok(PredictionResult {
                    effort: class,
                    class,
                    raw: class,
                    probabilities: Some(probs),
                })
            }
        }
    }

    /// Effort estimate for one representation.
    pub fn predict_effort(&self, rep: &Representation) -> Result<PredictionResult> {
        let (out, _) = self.forward(&self.params, &[rep])?;
        self.result_from_row(out.row(0))
    }

    /// Bucket prediction with class probabilities; softmax heads only.
    pub fn predict_class(&self, rep: &Representation) -> Result<PredictionResult> {
        if self.config.output != OutputKind::Softmax {
            return Err(Error::NotClassifier);
        }
        self.predict_effort(rep)
    }

    /// Predictions for many representations, in input order.
    pub fn predict_batch(&self, reps: &[Representation]) -> Result<Vec<PredictionResult>> {
        let chunks: Vec<Vec<PredictionResult>> = reps
            .par_chunks(64)
            .map(|chunk| {
                let refs: Vec<&Representation> = chunk.iter().collect();
                let (out, _) = self.forward(&self.params, &refs)?;
                (0..chunk.len()).map(|i| self.result_from_row(out.row(i))).collect()
            })
            .collect::<Result<_>>()?;
        Ok(chunks.into_iter().flatten().collect())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ckpt = Checkpoint::new(self.params.clone())
            .with_metadata("model_kind", "estimator")
            .with_metadata("head_config", self.config.to_json())
            .with_metadata("input_dim", self.input_dim.to_string())
            .with_metadata("source", serde_json::to_string(&self.source).expect("descriptor serializes"));
        for (k, v) in &self.metadata {
            ckpt = ckpt.with_metadata(k, v.clone());
        }
        ckpt
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let meta = |key: &str| {
            ckpt.metadata
                .get(key)
                .ok_or_else(|| Error::Checkpoint(format!("missing `{key}` metadata")))
        };
        let config: HeadConfig = serde_json::from_str(meta("head_config")?)?;
        let input_dim: usize = meta("input_dim")?
            .parse()
            .map_err(|_| Error::Checkpoint("bad input_dim".into()))?;
        let source: SourceDescriptor = serde_json::from_str(meta("source")?)?;
        let mut model = build_estimator(&config, input_dim, source)?;
        model.params.copy_from(&ckpt.params)?;
        model.metadata = ckpt
            .metadata
            .iter()
            .filter(|(k, _)| !["model_kind", "head_config", "input_dim", "source"].contains(&k.as_str()))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn source() -> SourceDescriptor {
        SourceDescriptor {
            kind: SourceKind::Static,
            fine_tuned: false,
            identity: "test".into(),
            pooling: "mean".into(),
        }
    }

    #[test]
    fn sequence_parameter_count_matches_formula() {
        let m = build_estimator(&HeadConfig::default(), 100, source()).unwrap();
        let (d, h) = (100, 50);
        let lstm = 4 * h * (d + h + 1);
        let expected = lstm + (h * 50 + 50) + (50 * 10 + 10) + (10 + 1);
        assert_eq!(m.num_parameters(), expected);
        assert_eq!(expected, 33_271);
    }

    #[test]
    fn pooled_parameter_count() {
        let c = HeadConfig {
            input: InputMode::Pooled,
            ..Default::default()
        };
        let m = build_estimator(&c, 64, source()).unwrap();
        assert_eq!(m.num_parameters(), (64 * 50 + 50) + (50 * 10 + 10) + 11);
    }

    #[test]
    fn same_seed_same_init() {
        let a = build_estimator(&HeadConfig::default(), 8, source()).unwrap();
        let b = build_estimator(&HeadConfig::default(), 8, source()).unwrap();
        assert_eq!(a.params(), b.params());
    }

    #[test]
    fn softmax_head_has_nine_outputs() {
        let c = HeadConfig {
            output: OutputKind::Softmax,
            ..Default::default()
        };
        assert_eq!(build_estimator(&c, 8, source()).unwrap().output_size(), 9);
    }

    #[test]
    fn clamping_and_buckets() {
        let p = prediction_from_raw(-3.2).unwrap();
        assert_eq!((p.effort, p.class, p.raw), (1.0, 1.0, -3.2));
        let p = prediction_from_raw(6.0).unwrap();
        assert_eq!((p.effort, p.class), (6.0, 5.0));
        let p = prediction_from_raw(250.0).unwrap();
        assert_eq!((p.effort, p.class), (100.0, 100.0));
    }

    #[test]
    fn ties_go_to_the_lowest_bucket() {
        assert_eq!(argmax_lowest(&[0.5; 9]), 0);
        assert_eq!(argmax_lowest(&[0.1, 0.4, 0.4, 0.1]), 1);
    }

    #[test]
    fn linear_head_is_not_a_classifier() {
        let m = build_estimator(&HeadConfig::default(), 4, source()).unwrap();
        let rep = Representation::Sequence(Tensor::zeros(&[2, 4]));
        assert!(matches!(m.predict_class(&rep), Err(Error::NotClassifier)));
    }

    #[test]
    fn uniform_logits_pick_the_lowest_class() {
        let c = HeadConfig {
            input: InputMode::Pooled,
            output: OutputKind::Softmax,
            ..Default::default()
        };
        let mut m = build_estimator(&c, 3, source()).unwrap();
        let (w, b) = (m.output.weight, m.output.bias);
        m.params.get_mut(w).fill(0.0);
        m.params.get_mut(b).fill(0.0);
        let p = m.predict_class(&Representation::Pooled(vec![0.3, -0.1, 2.0])).unwrap();
        assert_eq!(p.class, 1.0);
        let probs = p.probabilities.unwrap();
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn mode_and_dimension_checks() {
        let m = build_estimator(&HeadConfig::default(), 4, source()).unwrap();
        assert!(m.predict_effort(&Representation::Pooled(vec![0.0; 4])).is_err());
        assert!(m.predict_effort(&Representation::Sequence(Tensor::zeros(&[3, 5]))).is_err());
        assert!(m.predict_effort(&Representation::Sequence(Tensor::zeros(&[3, 4]))).is_ok());
    }
}
