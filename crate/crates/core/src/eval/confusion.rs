//! Bucket-by-bucket confusion counts.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::BucketScheme;
use crate::error::{Error, Result};

/// Rows are actual buckets, columns predicted buckets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub buckets: Vec<f64>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    /// Each row divided by its sum; empty rows stay zero.
    pub fn normalized(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|row| {
                let s: u64 = row.iter().sum();
                row.iter()
                    .map(|&c| if s == 0 { 0.0 } else { c as f64 / s as f64 })
                    .collect()
            })
            .collect()
    }

    pub fn get(&self, actual: f64, predicted: f64) -> Option<u64> {
        let i = self.buckets.iter().position(|&b| b == actual)?;
        let j = self.buckets.iter().position(|&b| b == predicted)?;
        Some(self.counts[i][j])
    }

    /// Writes `<stem>.csv` (counts) and `<stem>_normalized.csv`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        let header: Vec<String> = std::iter::once("actual\\predicted".to_string())
            .chain(self.buckets.iter().map(|b| b.to_string()))
            .collect();
        let counts = self.counts.iter().map(|r| r.iter().map(u64::to_string).collect());
        write_matrix(&dir.join(format!("{stem}.csv")), &header, &self.buckets, counts)?;
        let normalized = self.normalized().into_iter().map(|r| r.iter().map(|v| format!("{v:.4}")).collect());
        write_matrix(&dir.join(format!("{stem}_normalized.csv")), &header, &self.buckets, normalized)
    }
}

fn write_matrix(
    path: &Path,
    header: &[String],
    labels: &[f64],
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for (label, row) in labels.iter().zip(rows) {
        w.write_record(std::iter::once(label.to_string()).chain(row))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn confusion_matrix(actual: &[f64], predicted: &[f64], scheme: &BucketScheme) -> Result<ConfusionMatrix> {
    if actual.len() != predicted.len() {
        return Err(Error::LengthMismatch(actual.len(), predicted.len()));
    }
    let k = scheme.len();
    let mut counts = vec![vec![0u64; k]; k];
    for (&a, &p) in actual.iter().zip(predicted) {
        counts[scheme.index_of(a)?][scheme.index_of(p)?] += 1;
    }
    Ok(ConfusionMatrix {
        buckets: scheme.buckets().to_vec(),
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_pairs() {
        let m = confusion_matrix(&[1.0, 5.0], &[1.0, 8.0], &BucketScheme::planning_poker()).unwrap();
        assert_eq!(m.get(1.0, 1.0), Some(1));
        assert_eq!(m.get(5.0, 8.0), Some(1));
        assert_eq!(m.total(), 2);
        assert_eq!(m.counts.len(), 9);
    }

    #[test]
    fn perfect_is_diagonal() {
        let v = [1.0, 2.0, 2.0, 100.0];
        let m = confusion_matrix(&v, &v, &BucketScheme::planning_poker()).unwrap();
        for (i, row) in m.counts.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                if i != j {
                    assert_eq!(c, 0);
                }
            }
        }
        assert_eq!(m.row_sums()[1], 2);
    }

    #[test]
    fn normalized_rows() {
        let m = confusion_matrix(&[3.0, 3.0, 3.0, 3.0], &[3.0, 5.0, 5.0, 5.0], &BucketScheme::planning_poker()).unwrap();
        let n = m.normalized();
        assert_eq!(n[2][2], 0.25);
        assert_eq!(n[2][3], 0.75);
        assert!(n[0].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn outside_scheme() {
        assert!(matches!(
            confusion_matrix(&[4.0], &[5.0], &BucketScheme::planning_poker()),
            Err(Error::NotABucket(_))
        ));
    }
}
