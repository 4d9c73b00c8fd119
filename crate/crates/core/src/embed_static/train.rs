//! Negative-sampling training for CBOW and skip-gram, plus continued
//! training with vocabulary extension.

use super::model::{StaticEmbeddingModel, StaticMode, StaticTrainConfig};
use crate::corpus::{build_word_vocab, count_tokens, Cleaner, UnlabeledCorpus, Vocabulary};
use crate::error::{Error, Result};
use crate::numkernel::{sigmoid, Tensor};
use crate::rng::RngStream;

const NOISE_POWER: f64 = 0.75;
const MIN_LR_FRACTION: f64 = 1e-4;
const MAX_EXP: f64 = 30.0;

/// Cumulative unigram^0.75 distribution for drawing negatives.
#[derive(Debug, Clone)]
pub struct NoiseTable {
    cumulative: Vec<f64>,
}

impl NoiseTable {
    /// Entries with zero count are never drawn.
    pub fn new(counts: &[u64]) -> Option<Self> {
        let mut total = 0.0;
        let cumulative: Vec<f64> = counts
            .iter()
            .map(|&c| {
                total += (c as f64).powf(NOISE_POWER);
                total
            })
            .collect();
        if total <= 0.0 {
            return None;
        }
        Some(Self { cumulative })
    }

    pub fn sample(&self, rng: &mut RngStream) -> usize {
        let total = *self.cumulative.last().unwrap();
        let u = rng.uniform(0.0, total);
        self.cumulative.partition_point(|&c| c <= u).min(self.cumulative.len() - 1)
    }
}

/// Sentences of in-vocabulary indices (unknown words dropped).
fn index_sentences(texts: &[String], vocab: &Vocabulary) -> Vec<Vec<usize>> {
    texts
        .iter()
        .map(|t| {
            t.split_whitespace()
                .filter_map(|w| vocab.get(w).filter(|&i| !vocab.is_special(i)))
                .collect()
        })
        .collect()
}

fn has_pairs(sentences: &[Vec<usize>]) -> bool {
    sentences.iter().any(|s| s.len() >= 2)
}

/// Running state of an SGD pass, shared by training and fine-tuning.
struct Trainer<'a> {
    model: &'a mut StaticEmbeddingModel,
    noise: NoiseTable,
    rng: RngStream,
    total_words: usize,
    processed: usize,
    base_lr: f64,
}

impl Trainer<'_> {
    fn current_lr(&self) -> f64 {
        let progress = self.processed as f64 / self.total_words.max(1) as f64;
        (self.base_lr * (1.0 - progress)).max(self.base_lr * MIN_LR_FRACTION)
    }

    /// One negative-sampling update of `hidden` against `target`; the
    /// gradient for `hidden` is accumulated into `grad_hidden`.
    fn update_output(&mut self, hidden: &[f64], target: usize, grad_hidden: &mut [f64], lr: f64) {
        let d = hidden.len();
        let negatives = self.model.config.negatives;
        for k in 0..=negatives {
            let (word, label) = if k == 0 {
                (target, 1.0)
            } else {
                let w = self.noise.sample(&mut self.rng);
                if w == target {
                    continue;
                }
                (w, 0.0)
            };
            let out_row = self.model.output.row_mut(word);
            let score: f64 = hidden.iter().zip(out_row.iter()).map(|(a, b)| a * b).sum();
            let g = (label - sigmoid(score.clamp(-MAX_EXP, MAX_EXP))) * lr;
            for j in 0..d {
                grad_hidden[j] += g * out_row[j];
                out_row[j] += g * hidden[j];
            }
        }
    }

    fn train_sentence(&mut self, sentence: &[usize]) {
        let d = self.model.config.dimension;
        let window = self.model.config.window;
        let mut hidden = vec![0.0; d];
        let mut grad = vec![0.0; d];
        for pos in 0..sentence.len() {
            let lr = self.current_lr();
            self.processed += 1;
            let reduced = self.rng.below(window);
            let span = window - reduced;
            let lo = pos.saturating_sub(span);
            let hi = (pos + span).min(sentence.len() - 1);
            let context: Vec<usize> = (lo..=hi).filter(|&j| j != pos).map(|j| sentence[j]).collect();
            if context.is_empty() {
                continue;
            }
            match self.model.config.mode {
                StaticMode::Cbow => {
                    hidden.fill(0.0);
                    for &c in &context {
                        hidden.iter_mut().zip(self.model.input.row(c)).for_each(|(h, v)| *h += v);
                    }
                    hidden.iter_mut().for_each(|h| *h /= context.len() as f64);
                    grad.fill(0.0);
                    self.update_output(&hidden, sentence[pos], &mut grad, lr);
                    for &c in &context {
                        self.model
                            .input
                            .row_mut(c)
                            .iter_mut()
                            .zip(&grad)
                            .for_each(|(v, g)| *v += g);
                    }
                }
                StaticMode::Skipgram => {
                    let center = sentence[pos];
                    for &c in &context {
                        hidden.copy_from_slice(self.model.input.row(center));
                        grad.fill(0.0);
                        self.update_output(&hidden, c, &mut grad, lr);
                        self.model
                            .input
                            .row_mut(center)
                            .iter_mut()
                            .zip(&grad)
                            .for_each(|(v, g)| *v += g);
                    }
                }
            }
        }
    }

    fn run_epoch(&mut self, sentences: &[Vec<usize>]) {
        let mut order: Vec<usize> = (0..sentences.len()).collect();
        self.rng.shuffle(&mut order);
        for i in order {
            self.train_sentence(&sentences[i]);
        }
    }
}

fn clean_all(corpus: &UnlabeledCorpus, cleaner: &Cleaner) -> Vec<String> {
    corpus.documents().iter().map(|d| cleaner.clean(d)).collect()
}

/// Trains a fresh model. `on_epoch` sees the model after each epoch.
pub fn train_static_with(
    corpus: &UnlabeledCorpus,
    cleaner: &Cleaner,
    config: &StaticTrainConfig,
    mut on_epoch: impl FnMut(usize, &StaticEmbeddingModel),
) -> Result<StaticEmbeddingModel> {
    config.validate()?;
    let texts = clean_all(corpus, cleaner);
    let vocab = build_word_vocab(texts.iter().map(String::as_str), config.min_count)?;
    let sentences = index_sentences(&texts, &vocab);
    if !has_pairs(&sentences) {
        return Err(Error::NoTrainingPairs);
    }
    let d = config.dimension;
    let root = RngStream::new(config.seed);
    let mut init_rng = root.derive(0);
    let input = Tensor::uniform(&[vocab.len(), d], 0.5 / d as f64, &mut init_rng);
    let output = Tensor::zeros(&[vocab.len(), d]);
    let noise = NoiseTable::new(vocab.counts()).expect("vocabulary has counted tokens");
    let mut model = StaticEmbeddingModel::new(vocab, input, output, config.clone())?;
    let words: usize = sentences.iter().map(Vec::len).sum();
    let mut trainer = Trainer {
        model: &mut model,
        noise,
        rng: root.derive(1),
        total_words: words * config.epochs,
        processed: 0,
        base_lr: config.learning_rate,
    };
    for epoch in 0..config.epochs {
        trainer.run_epoch(&sentences);
        on_epoch(epoch, trainer.model);
    }
    Ok(model)
}

pub fn train_static(
    corpus: &UnlabeledCorpus,
    cleaner: &Cleaner,
    config: &StaticTrainConfig,
) -> Result<StaticEmbeddingModel> {
    train_static_with(corpus, cleaner, config, |_, _| {})
}

/// Continues training on `corpus`.
///
/// Tokens reaching the model's `min_count` in the new corpus are appended to
/// the vocabulary with input rows uniform in `±0.5/d` and zero output rows.
/// Negatives are drawn from the new corpus only, so rows of words absent from
/// it are never touched.
pub fn finetune_static(
    model: &StaticEmbeddingModel,
    corpus: &UnlabeledCorpus,
    cleaner: &Cleaner,
    extra_epochs: usize,
) -> Result<StaticEmbeddingModel> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let texts = clean_all(corpus, cleaner);
    let counts = count_tokens(texts.iter().map(String::as_str));
    let mut new_tokens: Vec<(&String, u64)> = counts
        .iter()
        .filter(|(t, &c)| c >= model.config.min_count as u64 && model.vocab.get(t).is_none())
        .map(|(t, &c)| (t, c))
        .collect();
    new_tokens.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

    let d = model.config.dimension;
    let root = RngStream::new(model.config.seed).derive(0xF17E);
    let mut init_rng = root.derive(0);
    let mut vocab = model.vocab.clone();
    for i in 0..vocab.len() {
        if let Some(&extra) = counts.get(vocab.token(i)) {
            vocab.add_count(i, extra);
        }
    }
    let mut input_rows = model.input.data().to_vec();
    let mut output_rows = model.output.data().to_vec();
    for (token, count) in &new_tokens {
        vocab.insert(token, *count);
        input_rows.extend((0..d).map(|_| init_rng.uniform(-0.5 / d as f64, 0.5 / d as f64)));
        output_rows.extend(std::iter::repeat_n(0.0, d));
    }
    let input = Tensor::from_vec(&[vocab.len(), d], input_rows)?;
    let output = Tensor::from_vec(&[vocab.len(), d], output_rows)?;
    let mut tuned = StaticEmbeddingModel::new(vocab, input, output, model.config.clone())?;

    let sentences = index_sentences(&texts, &tuned.vocab);
    let corpus_counts: Vec<u64> = tuned
        .vocab
        .tokens()
        .iter()
        .enumerate()
        .map(|(i, t)| if tuned.vocab.is_special(i) { 0 } else { counts.get(t).copied().unwrap_or(0) })
        .collect();
    let Some(noise) = NoiseTable::new(&corpus_counts) else {
        return Ok(tuned);
    };
    if extra_epochs == 0 || !has_pairs(&sentences) {
        return Ok(tuned);
    }
    let words: usize = sentences.iter().map(Vec::len).sum();
    let base_lr = tuned.config.learning_rate;
    let mut trainer = Trainer {
        model: &mut tuned,
        noise,
        rng: root.derive(1),
        total_words: words * extra_epochs,
        processed: 0,
        base_lr,
    };
    for _ in 0..extra_epochs {
        trainer.run_epoch(&sentences);
    }
    Ok(tuned)
}

/// One probe example: a center word, a true context word and fixed negatives.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbePair {
    pub center: usize,
    pub context: usize,
    pub negatives: Vec<usize>,
}

/// Draws a fixed batch of skip-gram probe pairs from `corpus`.
pub fn sample_probe_pairs(
    model: &StaticEmbeddingModel,
    corpus: &UnlabeledCorpus,
    cleaner: &Cleaner,
    count: usize,
    seed: u64,
) -> Vec<ProbePair> {
    let texts = clean_all(corpus, cleaner);
    let sentences: Vec<Vec<usize>> = index_sentences(&texts, &model.vocab)
        .into_iter()
        .filter(|s| s.len() >= 2)
        .collect();
    let Some(noise) = NoiseTable::new(&model.vocab.counts().to_vec()) else {
        return Vec::new();
    };
    if sentences.is_empty() {
        return Vec::new();
    }
    let mut rng = RngStream::new(seed);
    let window = model.config.window;
    (0..count)
        .map(|_| {
            let s = &sentences[rng.below(sentences.len())];
            let pos = rng.below(s.len());
            let lo = pos.saturating_sub(window);
            let hi = (pos + window).min(s.len() - 1);
            let mut ctx = lo + rng.below(hi - lo);
            if ctx >= pos {
                ctx += 1;
            }
            ProbePair {
                center: s[pos],
                context: s[ctx.min(s.len() - 1)],
                negatives: (0..model.config.negatives).map(|_| noise.sample(&mut rng)).collect(),
            }
        })
        .collect()
}

/// Mean negative-sampling loss of `model` on fixed probe pairs.
pub fn negative_sampling_loss(model: &StaticEmbeddingModel, pairs: &[ProbePair]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let score = |a: usize, b: usize| -> f64 {
        model
            .input
            .row(a)
            .iter()
            .zip(model.output.row(b))
            .map(|(x, y)| x * y)
            .sum()
    };
    let total: f64 = pairs
        .iter()
        .map(|p| {
            let mut l = -sigmoid(score(p.center, p.context)).max(f64::MIN_POSITIVE).ln();
            for &n in &p.negatives {
                l -= sigmoid(-score(p.center, n)).max(f64::MIN_POSITIVE).ln();
            }
            l
        })
        .sum();
    total / pairs.len() as f64
}
