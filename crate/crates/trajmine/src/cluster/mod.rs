//! Clustering primitives used by the three mining perspectives: Lloyd's
//! k-means with seeded restarts, Ward-linkage agglomerative clustering, and
//! the small feature-space helpers they share.

pub mod hac;
pub mod kmeans;

pub use hac::{cut_dendrogram, hac_ward, leaf_order, Dendrogram, Merge};
pub use kmeans::{kmeans, sse_curve, KMeansResult, SseCurve};

use crate::error::{Error, Result};

/// A point in feature space. Construction rejects non-finite components, so
/// downstream distance math never sees NaN or infinity.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<FeatureVector> {
        if values.is_empty() {
            return Err(Error::InvalidInput("feature vector is empty".into()));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "feature vector has non-finite component {bad}"
            )));
        }
        Ok(FeatureVector(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Squared Euclidean distance.
pub fn sqdist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Min-max scale a vector into `[0, 1]`. A constant vector maps to all
/// zeros so that flat profiles stay comparable instead of dividing by zero.
pub fn minmax_normalize(values: &[f64]) -> Vec<f64> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() || min == max {
        return vec![0.0; values.len()];
    }
    let range = max - min;
    values.iter().map(|v| (v - min) / range).collect()
}

/// Mean silhouette coefficient over all points, using Euclidean distances.
/// A point in a singleton cluster scores 0. Needs at least two clusters.
pub fn silhouette(points: &[FeatureVector], assignments: &[usize], k: usize) -> Result<f64> {
    if points.len() != assignments.len() {
        return Err(Error::InvalidInput(
            "assignments do not match the number of points".into(),
        ));
    }
    if points.is_empty() {
        return Err(Error::InvalidInput("no points to score".into()));
    }
    if k < 2 {
        return Err(Error::InvalidInput(
            "silhouette needs at least two clusters".into(),
        ));
    }
    let mut sizes = vec![0usize; k];
    for &a in assignments {
        if a >= k {
            return Err(Error::InvalidInput(format!("assignment {a} out of range")));
        }
        sizes[a] += 1;
    }

    let n = points.len();
    let mut total = 0.0;
    for i in 0..n {
        let own = assignments[i];
        if sizes[own] <= 1 {
            continue; // singleton scores 0
        }
        // Mean distance from point i to every cluster.
        let mut sums = vec![0.0f64; k];
        for j in 0..n {
            if i == j {
                continue;
            }
            let d = sqdist(points[i].as_slice(), points[j].as_slice()).sqrt();
            sums[assignments[j]] += d;
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        if b.is_finite() {
            total += (b - a) / a.max(b);
        }
    }
    Ok(total / n as f64)
}
