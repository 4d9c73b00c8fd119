//! The five estimation experiments over a cross-validation plan.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{HeadConfig, OutputKind};
use super::model::{build_estimator, Representation, SourceKind};
use super::source::RepresentationSource;
use super::train::{train_estimator, Sample};
use crate::corpus::{holdout, BucketScheme, Cleaner, LabeledCorpus, SplitKind, SplitPlan};
use crate::error::{Error, Result};
use crate::eval::{confusion_matrix, EvalReport, FoldRecord, MeanStd, MetricSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ExperimentId {
    E1,
    E2,
    E3,
    E4,
    E5,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 5] = [Self::E1, Self::E2, Self::E3, Self::E4, Self::E5];

    /// Embedding kind and whether it must be fine-tuned.
    pub fn required_source(self) -> (SourceKind, bool) {
        match self {
            Self::E1 => (SourceKind::Static, false),
            Self::E2 => (SourceKind::Static, true),
            Self::E3 => (SourceKind::Contextual, false),
            Self::E4 | Self::E5 => (SourceKind::Contextual, true),
        }
    }

    pub fn output(self) -> OutputKind {
        match self {
            Self::E5 => OutputKind::Softmax,
            _ => OutputKind::Linear,
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Self::E1 => "static base embeddings, regression head",
            Self::E2 => "static fine-tuned embeddings, regression head",
            Self::E3 => "contextual base embeddings, regression head",
            Self::E4 => "contextual fine-tuned embeddings, regression head",
            Self::E5 => "contextual fine-tuned embeddings, bucket classifier",
        }
    }
}

impl std::fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

impl std::str::FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`, expected E1 to E5")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOptions {
    /// Head settings; the output kind is taken from the experiment id.
    pub head: HeadConfig,
    /// Share of each training portion held out for early stopping.
    pub validation_fraction: f64,
    /// Where to save one estimator checkpoint per round.
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            head: HeadConfig::default(),
            validation_fraction: 0.1,
            checkpoint_dir: None,
        }
    }
}

fn validate_plan(plan: &SplitPlan, n: usize) -> Result<()> {
    let fail = |m: String| Err(Error::InvalidSplit(m));
    if plan.rounds.is_empty() {
        return fail("the plan has no rounds".into());
    }
    let mut tested = vec![false; n];
    for round in &plan.rounds {
        let mut in_round = vec![false; n];
        for &i in round.test.iter().chain(&round.train) {
            if i >= n {
                return fail(format!("index {i} is outside a corpus of {n} records"));
            }
            if in_round[i] {
                return fail(format!("record {i} appears twice in round `{}`", round.label));
            }
            in_round[i] = true;
        }
        for &i in &round.test {
            if tested[i] {
                return fail(format!("record {i} is tested in more than one round"));
            }
            tested[i] = true;
        }
        if round.train.len() < 2 || round.test.is_empty() {
            return fail(format!("round `{}` is too small", round.label));
        }
    }
    if tested.iter().any(|t| !t) {
        return fail(format!("the plan covers {} of {n} records", plan.corpus_len()));
    }
    Ok(())
}

/// Represents every record of `corpus` once, after cleaning.
pub fn represent_corpus(
    corpus: &LabeledCorpus,
    cleaner: &Cleaner,
    source: &dyn RepresentationSource,
    head: &HeadConfig,
) -> Result<Vec<(Representation, bool)>> {
    corpus
        .records()
        .par_iter()
        .map(|r| source.represent(&cleaner.clean(&r.text), head.input))
        .collect()
}

/// Trains and tests one head per round of `plan` and aggregates the results.
pub fn run_experiment(
    id: ExperimentId,
    corpus: &LabeledCorpus,
    cleaner: &Cleaner,
    source: &dyn RepresentationSource,
    plan: &SplitPlan,
    options: &ExperimentOptions,
) -> Result<EvalReport> {
    let descriptor = source.descriptor();
    let (kind, fine_tuned) = id.required_source();
    if descriptor.kind != kind || descriptor.fine_tuned != fine_tuned {
        return Err(Error::MissingEmbedding(format!(
            "{id} needs a {} embedding model, got {descriptor}",
            if fine_tuned { "fine-tuned" } else { "base" }
        )));
    }
    validate_plan(plan, corpus.len())?;
    if !(0.0..1.0).contains(&options.validation_fraction) {
        return Err(Error::Config("validation fraction must be in [0, 1)".into()));
    }
    let head = HeadConfig {
        output: id.output(),
        ..options.head.clone()
    };
    head.validate()?;
    if let Some(dir) = &options.checkpoint_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    let reps = represent_corpus(corpus, cleaner, source, &head)?;
    let records = corpus.records();
    let scheme = BucketScheme::planning_poker();
    let mut folds = Vec::with_capacity(plan.rounds.len());
    let (mut all_actual, mut all_predicted) = (Vec::new(), Vec::new());

    for (r, round) in plan.rounds.iter().enumerate() {
        let usable: Vec<usize> = round.train.iter().copied().filter(|&i| !reps[i].1).collect();
        let split_seed = head.seed.wrapping_add(r as u64);
        let (train_idx, val_idx) = holdout(&usable, options.validation_fraction, split_seed);
        if train_idx.is_empty() || val_idx.is_empty() {
            return Err(Error::InvalidSplit(format!(
                "round `{}` leaves no training or validation records",
                round.label
            )));
        }
        let samples = |idx: &[usize]| -> Vec<Sample<'_>> { idx.iter().map(|&i| (&reps[i].0, records[i].effort)).collect() };
        let mut model = build_estimator(&head, source.dimension(), descriptor.clone())?;
        let history = train_estimator(&mut model, &samples(&train_idx), &samples(&val_idx))?;

        let test_reps: Vec<Representation> = round.test.iter().map(|&i| reps[i].0.clone()).collect();
        let predictions = model.predict_batch(&test_reps)?;
        let actual: Vec<f64> = round.test.iter().map(|&i| records[i].effort).collect();
        let predicted: Vec<f64> = predictions.iter().map(|p| p.effort).collect();
        let effort = MeanStd::of(&actual)?;
        folds.push(FoldRecord {
            label: round.label.clone(),
            metrics: MetricSet::compute(&actual, &predicted)?,
            train_size: train_idx.len(),
            validation_size: val_idx.len(),
            best_epoch: history.best_epoch,
            best_validation_mae: history.best_val_mae,
            effort_mean: effort.mean,
            effort_std: effort.std,
        });
        for (a, p) in actual.iter().zip(&predictions) {
            all_actual.push(scheme.bucketize(*a)?);
            all_predicted.push(p.class);
        }

        if let Some(dir) = &options.checkpoint_dir {
            model.metadata.insert("experiment".into(), id.to_string());
            model.metadata.insert("round".into(), round.label.clone());
            model.metadata.insert("split_seed".into(), split_seed.to_string());
            model.metadata.insert("history".into(), serde_json::to_string(&history)?);
            model.save(&dir.join(format!("{id}-{}.ckpt", round.label)))?;
        }
    }

    let confusion = confusion_matrix(&all_actual, &all_predicted, &scheme)?;
    let degenerate = reps.iter().filter(|r| r.1).count();
    let mut provenance = BTreeMap::new();
    provenance.insert("embedding".to_string(), descriptor.to_string());
    provenance.insert("embedding_identity".to_string(), descriptor.identity.clone());
    provenance.insert("pooling".to_string(), descriptor.pooling.clone());
    provenance.insert("input_mode".to_string(), head.input.to_string());
    provenance.insert("head_config".to_string(), head.to_json());
    provenance.insert("head_seed".to_string(), head.seed.to_string());
    provenance.insert("split_seed".to_string(), plan.seed.to_string());
    provenance.insert("validation_fraction".to_string(), options.validation_fraction.to_string());
    provenance.insert("degenerate_records".to_string(), degenerate.to_string());
    provenance.insert("records".to_string(), corpus.len().to_string());
    let split = match plan.kind {
        SplitKind::Kfold { k } => SplitKind::Kfold { k },
        SplitKind::LeaveOneProjectOut => SplitKind::LeaveOneProjectOut,
    };
    EvalReport::new(&id.to_string(), split, folds, Some(confusion), provenance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Round;

    #[test]
    fn ids_parse_case_insensitively() {
        assert_eq!("e4".parse::<ExperimentId>().unwrap(), ExperimentId::E4);
        assert!("E6".parse::<ExperimentId>().is_err());
        assert_eq!(ExperimentId::E5.output(), OutputKind::Softmax);
    }

    fn plan(rounds: Vec<(Vec<usize>, Vec<usize>)>) -> SplitPlan {
        SplitPlan {
            kind: SplitKind::Kfold { k: rounds.len() },
            seed: 0,
            rounds: rounds
                .into_iter()
                .enumerate()
                .map(|(i, (train, test))| Round {
                    label: i.to_string(),
                    train,
                    test,
                })
                .collect(),
        }
    }

    #[test]
    fn plan_checks() {
        assert!(validate_plan(&plan(vec![(vec![2, 3], vec![0, 1]), (vec![0, 1], vec![2, 3])]), 4).is_ok());
        assert!(validate_plan(&plan(vec![(vec![2, 3], vec![0, 1])]), 4).is_err());
        assert!(validate_plan(&plan(vec![(vec![2, 3], vec![0, 1]), (vec![0, 1], vec![2, 9])]), 4).is_err());
        assert!(validate_plan(&plan(vec![(vec![1, 3], vec![0, 1]), (vec![0, 1], vec![2, 3])]), 4).is_err());
    }
}
