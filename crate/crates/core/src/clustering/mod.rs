//! Clustering of pages on (mean dwell, click count) features.
//!
//! Algorithms implement [`ClusterAlgorithm`] and are looked up by name in a
//! [`ClusterRegistry`]. Every distance evaluation goes through a
//! [`DistanceCounter`] so runs can be compared by operation count.

mod farthest_first;
mod kmeans;
mod outliers;
mod registry;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use farthest_first::{farthest_first, FarthestFirst};
pub use kmeans::{kmeans_baseline, KMeans, KMeansParams};
pub use outliers::{iqr_outliers, quartiles, OutlierClass};
pub use registry::{AlgorithmOptions, ClusterRegistry};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusterError {
    #[error("cluster count must be at least 1")]
    ZeroClusters,
    #[error("no points to cluster")]
    EmptyInput,
    #[error("outlier factors must satisfy extreme >= outlier > 0 (got {outlier}, {extreme})")]
    BadFactors { outlier: f64, extreme: f64 },
    #[error("unknown clustering algorithm {0:?}")]
    UnknownAlgorithm(String),
    #[error("unknown distance metric {0:?} (expected euclid or manhattan)")]
    UnknownMetric(String),
}

/// One page in feature space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeaturePoint {
    pub page_id: usize,
    /// Mean dwell seconds.
    pub s: f64,
    /// Click count.
    pub c: f64,
}

impl FeaturePoint {
    pub fn new(page_id: usize, s: f64, c: f64) -> Self {
        Self { page_id, s, c }
    }

    fn coords(&self) -> (f64, f64) {
        (self.s, self.c)
    }
}

/// A cluster center in feature space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Centroid {
    pub s: f64,
    pub c: f64,
}

impl From<&FeaturePoint> for Centroid {
    fn from(p: &FeaturePoint) -> Self {
        Self { s: p.s, c: p.c }
    }
}

impl Centroid {
    fn as_point(&self) -> FeaturePoint {
        FeaturePoint::new(usize::MAX, self.s, self.c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Metric {
    #[default]
    Euclid,
    Manhattan,
}

impl Metric {
    pub fn distance(self, a: &FeaturePoint, b: &FeaturePoint) -> f64 {
        let (ds, dc) = (a.s - b.s, a.c - b.c);
        match self {
            Metric::Euclid => (ds * ds + dc * dc).sqrt(),
            Metric::Manhattan => ds.abs() + dc.abs(),
        }
    }
}

impl FromStr for Metric {
    type Err = ClusterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "euclid" | "euclidean" => Ok(Metric::Euclid),
            "manhattan" => Ok(Metric::Manhattan),
            other => Err(ClusterError::UnknownMetric(other.to_string())),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Euclid => "euclid",
            Metric::Manhattan => "manhattan",
        })
    }
}

/// Distance function that counts its own evaluations.
#[derive(Debug, Clone)]
pub struct DistanceCounter {
    metric: Metric,
    evals: u64,
}

impl DistanceCounter {
    pub fn new(metric: Metric) -> Self {
        Self { metric, evals: 0 }
    }

    #[inline]
    pub fn distance(&mut self, a: &FeaturePoint, b: &FeaturePoint) -> f64 {
        self.evals += 1;
        self.metric.distance(a, b)
    }

    pub fn evals(&self) -> u64 {
        self.evals
    }
}

/// Result of a clustering run.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub algorithm: String,
    /// Requested cluster count.
    pub k: usize,
    /// Centers in selection order.
    pub centers: Vec<Centroid>,
    /// Input index of each center when centers are data points.
    pub center_indices: Vec<usize>,
    /// Page id of each input point, aligned with `labels`.
    pub page_ids: Vec<usize>,
    /// Cluster index of each input point.
    pub labels: Vec<usize>,
    pub metric: Metric,
    pub distance_evals: u64,
    /// Lloyd iterations (0 for single-pass algorithms).
    pub iterations: usize,
}

impl ClusterModel {
    pub fn label_of(&self, page_id: usize) -> Option<usize> {
        self.page_ids
            .iter()
            .position(|&p| p == page_id)
            .map(|i| self.labels[i])
    }

    /// Rank of each cluster by descending center dwell; rank 0 holds the
    /// longest-dwell pages. Ties keep the lower center index first.
    pub fn cluster_ranks(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.centers.len()).collect();
        order.sort_by(|&a, &b| {
            self.centers[b]
                .s
                .total_cmp(&self.centers[a].s)
                .then(a.cmp(&b))
        });
        let mut ranks = vec![0; order.len()];
        for (rank, cluster) in order.into_iter().enumerate() {
            ranks[cluster] = rank;
        }
        ranks
    }

    /// Largest distance from any point to its own center.
    pub fn covering_radius(&self, points: &[FeaturePoint]) -> f64 {
        points
            .iter()
            .zip(&self.labels)
            .map(|(p, &l)| self.metric.distance(p, &self.centers[l].as_point()))
            .fold(0.0, f64::max)
    }

    /// Sum of squared distances from each point to its own center.
    pub fn inertia(&self, points: &[FeaturePoint]) -> f64 {
        points
            .iter()
            .zip(&self.labels)
            .map(|(p, &l)| self.metric.distance(p, &self.centers[l].as_point()).powi(2))
            .sum()
    }
}

/// A clustering strategy selectable by name.
pub trait ClusterAlgorithm {
    fn name(&self) -> &'static str;

    fn fit(
        &self,
        points: &[FeaturePoint],
        k: usize,
        metric: Metric,
    ) -> Result<ClusterModel, ClusterError>;
}

/// Labels every point with its nearest center, ties to the lower index.
pub(crate) fn assign(
    points: &[FeaturePoint],
    centers: &[Centroid],
    counter: &mut DistanceCounter,
) -> Vec<usize> {
    let centers: Vec<FeaturePoint> = centers.iter().map(Centroid::as_point).collect();
    points
        .iter()
        .map(|p| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (ci, c) in centers.iter().enumerate() {
                let d = counter.distance(p, c);
                if d < best_d {
                    best = ci;
                    best_d = d;
                }
            }
            best
        })
        .collect()
}

fn validate(points: &[FeaturePoint], k: usize) -> Result<(), ClusterError> {
    if k == 0 {
        return Err(ClusterError::ZeroClusters);
    }
    if points.is_empty() {
        return Err(ClusterError::EmptyInput);
    }
    Ok(())
}

/// Rescales both features to [0, 1]. Constant features map to 0.
pub fn min_max_normalize(points: &[FeaturePoint]) -> Vec<FeaturePoint> {
    let range = |f: fn(&FeaturePoint) -> f64| {
        points.iter().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        })
    };
    let (s_lo, s_hi) = range(|p| p.s);
    let (c_lo, c_hi) = range(|p| p.c);
    let scale = |v: f64, lo: f64, hi: f64| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 };
    points
        .iter()
        .map(|p| FeaturePoint::new(p.page_id, scale(p.s, s_lo, s_hi), scale(p.c, c_lo, c_hi)))
        .collect()
}

/// Fraction of points whose labels agree under the best one-to-one matching
/// of clusters between the two labelings.
pub fn label_agreement(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must cover the same points");
    if a.is_empty() {
        return 1.0;
    }
    let size = a.iter().chain(b).max().map_or(0, |m| m + 1);
    let mut counts = vec![vec![0i64; size]; size];
    for (&x, &y) in a.iter().zip(b) {
        counts[x][y] += 1;
    }
    let weights = pathfinding::matrix::Matrix::from_rows(counts).expect("square contingency table");
    let (matched, _) = pathfinding::kuhn_munkres::kuhn_munkres(&weights);
    matched as f64 / a.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distances() {
        let a = FeaturePoint::new(0, 3.0, 4.0);
        let o = FeaturePoint::new(1, 0.0, 0.0);
        assert_eq!(Metric::Euclid.distance(&a, &o), 5.0);
        assert_eq!(Metric::Manhattan.distance(&a, &o), 7.0);
        assert_eq!(Metric::Euclid.distance(&a, &a), 0.0);
        assert_eq!(Metric::Manhattan.distance(&a, &a), 0.0);
    }

    #[test]
    fn metric_names() {
        assert_eq!("euclid".parse::<Metric>().unwrap(), Metric::Euclid);
        assert_eq!("manhattan".parse::<Metric>().unwrap(), Metric::Manhattan);
        assert!("cosine".parse::<Metric>().is_err());
    }

    #[test]
    fn counter_counts() {
        let mut c = DistanceCounter::new(Metric::Euclid);
        let p = FeaturePoint::new(0, 1.0, 1.0);
        c.distance(&p, &p);
        c.distance(&p, &p);
        assert_eq!(c.evals(), 2);
    }

    #[test]
    fn agreement_is_permutation_invariant() {
        assert_eq!(label_agreement(&[0, 0, 1, 1], &[1, 1, 0, 0]), 1.0);
        assert_eq!(label_agreement(&[0, 0, 1, 1], &[0, 1, 1, 1]), 0.75);
        assert_eq!(label_agreement(&[0, 1, 2], &[0, 0, 0]), 1.0 / 3.0);
    }

    #[test]
    fn ranks_follow_center_dwell() {
        let model = ClusterModel {
            algorithm: "test".into(),
            k: 3,
            centers: vec![
                Centroid { s: 5.0, c: 0.0 },
                Centroid { s: 50.0, c: 0.0 },
                Centroid { s: 5.0, c: 9.0 },
            ],
            center_indices: vec![],
            page_ids: vec![],
            labels: vec![],
            metric: Metric::Euclid,
            distance_evals: 0,
            iterations: 0,
        };
        assert_eq!(model.cluster_ranks(), vec![1, 0, 2]);
    }

    #[test]
    fn normalization_bounds() {
        let pts = [
            FeaturePoint::new(0, 10.0, 1.0),
            FeaturePoint::new(1, 30.0, 1.0),
            FeaturePoint::new(2, 20.0, 1.0),
        ];
        let n = min_max_normalize(&pts);
        assert_eq!(n.iter().map(|p| p.s).collect::<Vec<_>>(), vec![0.0, 1.0, 0.5]);
        assert!(n.iter().all(|p| p.c == 0.0));
    }
}
