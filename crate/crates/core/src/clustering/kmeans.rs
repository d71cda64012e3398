use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    assign, validate, Centroid, ClusterAlgorithm, ClusterError, ClusterModel, DistanceCounter,
    FeaturePoint, Metric,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KMeansParams {
    pub max_iter: usize,
    /// Iterations to run even after the labels stop changing.
    pub min_iter: usize,
    pub rng_seed: u64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self {
            max_iter: 100,
            min_iter: 0,
            rng_seed: 0,
        }
    }
}

/// Lloyd's k-means with initial centers sampled (seeded) from the distinct
/// input points.
///
/// Each iteration assigns all points (`n * centers` distance evaluations)
/// and then moves every center to the mean of its members; an empty cluster
/// keeps its previous center. The loop stops when an assignment repeats the
/// previous one (after `min_iter`) or after `max_iter` iterations. A final
/// assignment against the last centers produces the returned labels, so the
/// total is `n * centers * (iterations + 1)` evaluations.
pub fn kmeans_baseline(
    points: &[FeaturePoint],
    k: usize,
    metric: Metric,
    params: KMeansParams,
) -> Result<ClusterModel, ClusterError> {
    validate(points, k)?;
    let mut counter = DistanceCounter::new(metric);

    let mut distinct: Vec<usize> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if !distinct.iter().any(|&j| points[j].coords() == p.coords()) {
            distinct.push(i);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let picks = sample(&mut rng, distinct.len(), k.min(distinct.len())).into_vec();
    let center_indices: Vec<usize> = picks.into_iter().map(|i| distinct[i]).collect();
    let mut centers: Vec<Centroid> = center_indices
        .iter()
        .map(|&i| Centroid::from(&points[i]))
        .collect();

    let mut previous: Option<Vec<usize>> = None;
    let mut iterations = 0;
    while iterations < params.max_iter {
        let labels = assign(points, &centers, &mut counter);
        iterations += 1;
        if iterations > params.min_iter && previous.as_ref() == Some(&labels) {
            break;
        }
        update_centers(points, &labels, &mut centers);
        previous = Some(labels);
    }
    let labels = assign(points, &centers, &mut counter);

    Ok(ClusterModel {
        algorithm: KMeans::NAME.to_string(),
        k,
        centers,
        center_indices,
        page_ids: points.iter().map(|p| p.page_id).collect(),
        labels,
        metric,
        distance_evals: counter.evals(),
        iterations,
    })
}

fn update_centers(points: &[FeaturePoint], labels: &[usize], centers: &mut [Centroid]) {
    let mut sums = vec![(0.0, 0.0, 0usize); centers.len()];
    for (p, &l) in points.iter().zip(labels) {
        sums[l].0 += p.s;
        sums[l].1 += p.c;
        sums[l].2 += 1;
    }
    for (center, (s, c, count)) in centers.iter_mut().zip(sums) {
        if count > 0 {
            *center = Centroid {
                s: s / count as f64,
                c: c / count as f64,
            };
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct KMeans {
    pub params: KMeansParams,
}

impl KMeans {
    pub const NAME: &'static str = "kmeans";

    pub fn new(params: KMeansParams) -> Self {
        Self { params }
    }
}

impl ClusterAlgorithm for KMeans {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn fit(
        &self,
        points: &[FeaturePoint],
        k: usize,
        metric: Metric,
    ) -> Result<ClusterModel, ClusterError> {
        kmeans_baseline(points, k, metric, self.params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pts(coords: &[(f64, f64)]) -> Vec<FeaturePoint> {
        coords
            .iter()
            .enumerate()
            .map(|(i, &(s, c))| FeaturePoint::new(i, s, c))
            .collect()
    }

    fn params(seed: u64) -> KMeansParams {
        KMeansParams {
            rng_seed: seed,
            ..KMeansParams::default()
        }
    }

    #[test]
    fn separated_pairs_split_for_every_seed() {
        let p = pts(&[(0.0, 0.0), (1.0, 0.0), (100.0, 50.0), (101.0, 50.0)]);
        for seed in 0..50 {
            let m = kmeans_baseline(&p, 2, Metric::Euclid, params(seed)).unwrap();
            assert_eq!(m.labels[0], m.labels[1], "seed {seed}");
            assert_eq!(m.labels[2], m.labels[3], "seed {seed}");
            assert_ne!(m.labels[0], m.labels[2], "seed {seed}");
        }
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let p = pts(&[(0.0, 0.0), (2.0, 4.0), (4.0, 2.0)]);
        let m = kmeans_baseline(&p, 1, Metric::Euclid, params(9)).unwrap();
        assert_eq!(m.centers, vec![Centroid { s: 2.0, c: 2.0 }]);
    }

    #[test]
    fn zero_iterations_uses_initial_centers() {
        let p = pts(&[(0.0, 0.0), (2.0, 4.0), (4.0, 2.0), (9.0, 9.0)]);
        let m = kmeans_baseline(&p, 2, Metric::Euclid, KMeansParams { max_iter: 0, ..params(3) }).unwrap();
        assert_eq!(m.iterations, 0);
        let initial: Vec<Centroid> = m.center_indices.iter().map(|&i| Centroid::from(&p[i])).collect();
        assert_eq!(m.centers, initial);
        assert_eq!(m.distance_evals, 4 * 2);
    }

    #[test]
    fn min_iter_forces_work() {
        let p = pts(&[(0.0, 0.0), (1.0, 0.0), (100.0, 50.0), (101.0, 50.0)]);
        let m = kmeans_baseline(&p, 2, Metric::Euclid, KMeansParams { max_iter: 50, min_iter: 7, rng_seed: 1 }).unwrap();
        assert_eq!(m.iterations, 8);
        assert_eq!(m.distance_evals, 4 * 2 * 9);
    }

    #[test]
    fn argument_errors() {
        assert_eq!(kmeans_baseline(&[], 2, Metric::Euclid, params(0)), Err(ClusterError::EmptyInput));
        let p = pts(&[(0.0, 0.0)]);
        assert_eq!(kmeans_baseline(&p, 0, Metric::Euclid, params(0)), Err(ClusterError::ZeroClusters));
    }

    fn arb_points() -> impl Strategy<Value = Vec<FeaturePoint>> {
        proptest::collection::vec((0.0f64..500.0, 0.0f64..100.0), 1..40).prop_map(|v| pts(&v))
    }

    proptest! {
        #[test]
        fn eval_budget_and_determinism(points in arb_points(), k in 1usize..6, seed in any::<u64>()) {
            let m = kmeans_baseline(&points, k, Metric::Euclid, params(seed)).unwrap();
            let n = points.len() as u64;
            let c = m.centers.len() as u64;
            prop_assert_eq!(m.distance_evals, n * c * (m.iterations as u64 + 1));
            prop_assert_eq!(&kmeans_baseline(&points, k, Metric::Euclid, params(seed)).unwrap(), &m);
        }

        #[test]
        fn inertia_never_increases(points in arb_points(), k in 1usize..6, seed in any::<u64>()) {
            let mut last = f64::INFINITY;
            for max_iter in 0..8 {
                let m = kmeans_baseline(&points, k, Metric::Euclid, KMeansParams { max_iter, min_iter: 0, rng_seed: seed }).unwrap();
                let inertia = m.inertia(&points);
                prop_assert!(inertia <= last * (1.0 + 1e-12) + 1e-9, "{} > {}", inertia, last);
                last = inertia;
            }
        }
    }
}
