//! Cross-validation plans: shuffled k-fold and leave-one-project-out.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::record::LabeledCorpus;
use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SplitKind {
    Kfold { k: usize },
    LeaveOneProjectOut,
}

/// One train/test round. Indices refer to positions in the corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Round {
    /// Fold number (k-fold) or held-out project id.
    pub label: String,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub kind: SplitKind,
    pub seed: u64,
    pub rounds: Vec<Round>,
}

impl SplitPlan {
    /// Maps every record id to the round in which it is tested.
    pub fn assignments(&self, corpus: &LabeledCorpus) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for (r, round) in self.rounds.iter().enumerate() {
            for &i in &round.test {
                out.insert(corpus.records()[i].id.clone(), r);
            }
        }
        out
    }

    /// Size of the corpus this plan partitions.
    pub fn corpus_len(&self) -> usize {
        self.rounds.iter().map(|r| r.test.len()).sum()
    }
}

/// Shuffled partition of `0..n` into `k` folds. The first `n % k` folds hold
/// one extra element.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidSplit(format!("k must be at least 2, got {k}")));
    }
    if k > n {
        return Err(Error::InvalidSplit(format!("k = {k} exceeds corpus size {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    RngStream::new(seed).shuffle(&mut order);
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut fold = order[start..start + size].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += size;
    }
    Ok(folds)
}

fn complement(n: usize, test: &[usize]) -> Vec<usize> {
    let mut in_test = vec![false; n];
    for &i in test {
        in_test[i] = true;
    }
    (0..n).filter(|&i| !in_test[i]).collect()
}

pub fn kfold_split(corpus: &LabeledCorpus, k: usize, seed: u64) -> Result<SplitPlan> {
    let n = corpus.len();
    let rounds = kfold_indices(n, k, seed)?
        .into_iter()
        .enumerate()
        .map(|(f, test)| Round {
            label: f.to_string(),
            train: complement(n, &test),
            test,
        })
        .collect();
    Ok(SplitPlan {
        kind: SplitKind::Kfold { k },
        seed,
        rounds,
    })
}

/// One round per project, in project-id order.
pub fn leave_one_project_out(corpus: &LabeledCorpus) -> Result<SplitPlan> {
    if corpus.projects().len() < 2 {
        return Err(Error::InvalidSplit(
            "leave-one-project-out needs at least two projects".into(),
        ));
    }
    let n = corpus.len();
    let rounds = corpus
        .projects()
        .iter()
        .map(|p| {
            let test: Vec<usize> = (0..n).filter(|&i| &corpus.records()[i].project_id == p).collect();
            Round {
                label: p.clone(),
                train: complement(n, &test),
                test,
            }
        })
        .collect();
    Ok(SplitPlan {
        kind: SplitKind::LeaveOneProjectOut,
        seed: 0,
        rounds,
    })
}

/// Seeded hold-out of `fraction` of `indices` (at least one element when
/// `indices.len() >= 2`). Returns `(train, validation)`.
pub fn holdout(indices: &[usize], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut order = indices.to_vec();
    RngStream::new(seed).shuffle(&mut order);
    let mut n_val = (indices.len() as f64 * fraction).round() as usize;
    if indices.len() >= 2 {
        n_val = n_val.clamp(1, indices.len() - 1);
    } else {
        n_val = 0;
    }
    let mut val = order[..n_val].to_vec();
    let mut train = order[n_val..].to_vec();
    val.sort_unstable();
    train.sort_unstable();
    (train, val)
}
