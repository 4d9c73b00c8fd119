//! Descriptive statistics of a labeled corpus.

use std::path::Path;

use serde::Serialize;

use super::bucket::BucketScheme;
use super::clean::Cleaner;
use super::record::LabeledCorpus;
use crate::error::{Error, Result};

/// Fixed-width bin `[lo, hi)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bin {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Moments {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Moments {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Self {
            mean,
            std: var.sqrt(),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub records: usize,
    pub words_per_text: Moments,
    pub effort: Moments,
    /// Records per Planning-Poker class, in class order.
    pub bucket_counts: Vec<(f64, u64)>,
    #[serde(skip)]
    pub words_histogram: Vec<Bin>,
    #[serde(skip)]
    pub effort_histogram: Vec<Bin>,
}

/// Contiguous histogram from the bin holding the minimum to the bin holding
/// the maximum.
pub fn histogram(values: &[f64], width: f64) -> Vec<Bin> {
    assert!(width > 0.0);
    if values.is_empty() {
        return Vec::new();
    }
    let bin_of = |v: f64| (v / width).floor() as i64;
    let lo = values.iter().map(|&v| bin_of(v)).min().unwrap();
    let hi = values.iter().map(|&v| bin_of(v)).max().unwrap();
    let mut counts = vec![0u64; (hi - lo + 1) as usize];
    for &v in values {
        counts[(bin_of(v) - lo) as usize] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| {
            let b = (lo + i as i64) as f64;
            Bin {
                bin_lo: b * width,
                bin_hi: (b + 1.0) * width,
                count,
            }
        })
        .collect()
}

/// Words are counted after cleaning; efforts use unit-width bins.
pub fn corpus_stats(corpus: &LabeledCorpus, cleaner: &Cleaner, words_bin_width: f64) -> Result<CorpusStats> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let words: Vec<f64> = corpus
        .records()
        .iter()
        .map(|r| cleaner.clean(&r.text).split_whitespace().count() as f64)
        .collect();
    let efforts: Vec<f64> = corpus.records().iter().map(|r| r.effort).collect();
    let scheme = BucketScheme::planning_poker();
    let bucket_counts = scheme.buckets().iter().copied().zip(scheme.counts(&efforts)?).collect();
    Ok(CorpusStats {
        records: corpus.len(),
        bucket_counts,
        words_per_text: Moments::of(&words).expect("non-empty"),
        effort: Moments::of(&efforts).expect("non-empty"),
        words_histogram: histogram(&words, words_bin_width),
        effort_histogram: histogram(&efforts, 1.0),
    })
}

pub fn write_histogram_csv(bins: &[Bin], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for b in bins {
        w.serialize(b)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

impl CorpusStats {
    /// Writes `words_hist.csv`, `effort_hist.csv`, `buckets.csv` and
    /// `summary.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let buckets = dir.join("buckets.csv");
        let mut w = csv::Writer::from_path(&buckets)?;
        w.write_record(["bucket", "count"])?;
        for (b, c) in &self.bucket_counts {
            w.write_record([b.to_string(), c.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(&buckets, e))?;
        write_histogram_csv(&self.words_histogram, &dir.join("words_hist.csv"))?;
        write_histogram_csv(&self.effort_histogram, &dir.join("effort_hist.csv"))?;
        let summary = dir.join("summary.json");
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(&summary, json + "\n").map_err(|e| Error::io(&summary, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::clean::Stopwords;
    use crate::corpus::record::RequirementRecord;

    fn corpus(items: &[(&str, f64)]) -> LabeledCorpus {
        LabeledCorpus::new(
            items
                .iter()
                .enumerate()
                .map(|(i, (t, e))| RequirementRecord {
                    id: i.to_string(),
                    project_id: "P".into(),
                    text: t.to_string(),
                    effort: *e,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn word_moments() {
        let c = corpus(&[("alpha beta", 1.0), ("alpha beta gamma delta", 2.0)]);
        let s = corpus_stats(&c, &Cleaner::new(Stopwords::none()), 10.0).unwrap();
        assert_eq!(s.words_per_text.mean, 3.0);
        assert_eq!(s.words_per_text.std, 1.0);
    }

    #[test]
    fn effort_histogram() {
        let c = corpus(&[("a", 1.0), ("b", 1.0), ("c", 2.0)]);
        let s = corpus_stats(&c, &Cleaner::new(Stopwords::none()), 10.0).unwrap();
        let counts: Vec<(f64, u64)> = s.effort_histogram.iter().map(|b| (b.bin_lo, b.count)).collect();
        assert_eq!(counts, vec![(1.0, 2), (2.0, 1)]);
    }

    #[test]
    fn empty_corpus() {
        let c = LabeledCorpus::new(vec![]).unwrap();
        assert!(matches!(corpus_stats(&c, &Cleaner::default(), 10.0), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn histogram_is_contiguous() {
        let h = histogram(&[0.0, 25.0], 10.0);
        assert_eq!(h.len(), 3);
        assert_eq!(h[1].count, 0);
        assert_eq!(h.iter().map(|b| b.count).sum::<u64>(), 2);
    }
}
