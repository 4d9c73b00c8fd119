//! Planning-Poker effort classes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The nine Planning-Poker classes.
pub const PLANNING_POKER: [f64; 9] = [1.0, 2.0, 3.0, 5.0, 8.0, 13.0, 20.0, 40.0, 100.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketScheme {
    buckets: Vec<f64>,
}

impl Default for BucketScheme {
    fn default() -> Self {
        Self::planning_poker()
    }
}

impl BucketScheme {
    pub fn planning_poker() -> Self {
        Self {
            buckets: PLANNING_POKER.to_vec(),
        }
    }

    /// Buckets must be finite, positive and strictly increasing.
    pub fn new(buckets: Vec<f64>) -> Result<Self> {
        if buckets.is_empty()
            || buckets.iter().any(|b| !b.is_finite() || *b <= 0.0)
            || buckets.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::Config("bucket values must be positive and strictly increasing".into()));
        }
        Ok(Self { buckets })
    }

    pub fn buckets(&self) -> &[f64] {
        &self.buckets
    }

    pub fn len(&self) -> usize {
        self.buckets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.is_empty()
    }

    /// Position of an exact bucket value.
    pub fn index_of(&self, value: f64) -> Result<usize> {
        self.buckets
            .iter()
            .position(|&b| b == value)
            .ok_or(Error::NotABucket(value))
    }

    pub fn value(&self, index: usize) -> f64 {
        self.buckets[index]
    }

    /// Index of the nearest bucket; ties go to the lower one.
    pub fn nearest_index(&self, effort: f64) -> Result<usize> {
        if !(effort > 0.0) {
            return Err(Error::NonPositiveEffort(effort));
        }
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (i, &b) in self.buckets.iter().enumerate() {
            let d = (effort - b).abs();
            if d < best_dist {
                best = i;
                best_dist = d;
            }
        }
        Ok(best)
    }

    pub fn bucketize(&self, effort: f64) -> Result<f64> {
        self.nearest_index(effort).map(|i| self.buckets[i])
    }

    /// Number of efforts falling into each bucket.
    pub fn counts(&self, efforts: &[f64]) -> Result<Vec<u64>> {
        let mut counts = vec![0u64; self.len()];
        for &e in efforts {
            counts[self.nearest_index(e)?] += 1;
        }
        Ok(counts)
    }
}

/// Nearest Planning-Poker class for `effort`.
pub fn bucketize(effort: f64, scheme: &BucketScheme) -> Result<f64> {
    scheme.bucketize(effort)
}
