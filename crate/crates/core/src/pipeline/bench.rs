use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ErrorKind, PipelineError, Result, Stage};
use crate::clustering::{
    farthest_first, kmeans_baseline, label_agreement, ClusterModel, FeaturePoint, KMeansParams, Metric,
};

const REPEATS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub n: usize,
    pub k: usize,
    /// Best of several runs, in seconds.
    pub ff_wall_seconds: f64,
    pub km_wall_seconds: f64,
    pub km_iterations: usize,
    pub ff_distance_evals: u64,
    pub km_distance_evals: u64,
    /// Fraction of points labelled alike under the best cluster matching.
    pub labels_agreement: f64,
}

impl BenchResult {
    pub fn to_text(&self) -> String {
        format!(
            "n={}\nk={}\nff_wall_seconds={:.6}\nkm_wall_seconds={:.6}\nkm_iterations={}\nff_distance_evals={}\nkm_distance_evals={}\nlabels_agreement={:.4}\n",
            self.n,
            self.k,
            self.ff_wall_seconds,
            self.km_wall_seconds,
            self.km_iterations,
            self.ff_distance_evals,
            self.km_distance_evals,
            self.labels_agreement
        )
    }
}

fn timed<F>(mut run: F) -> Result<(f64, ClusterModel)>
where
    F: FnMut() -> Result<ClusterModel>,
{
    let mut best = f64::INFINITY;
    let mut model = None;
    for _ in 0..REPEATS {
        let start = Instant::now();
        let m = run()?;
        best = best.min(start.elapsed().as_secs_f64());
        model = Some(m);
    }
    Ok((best, model.expect("at least one repeat")))
}

/// Clusters `n` seeded random points in the unit square with both
/// algorithms. k-means runs at least `t_min` iterations.
pub fn bench_compare(n: usize, k: usize, t_min: usize, seed: u64) -> Result<BenchResult> {
    let usage = |msg: String| PipelineError::new(Stage::Bench, ErrorKind::Usage, msg);
    if k == 0 || n < k {
        return Err(usage(format!("need 1 <= k <= n, got n={n} k={k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<FeaturePoint> = (0..n)
        .map(|i| FeaturePoint::new(i, rng.gen::<f64>(), rng.gen::<f64>()))
        .collect();
    let params = KMeansParams {
        max_iter: t_min.max(100),
        min_iter: t_min,
        rng_seed: seed,
    };
    let fail = |e: crate::clustering::ClusterError| usage(e.to_string());

    let (ff_wall, ff) = timed(|| farthest_first(&points, k, Metric::Euclid).map_err(fail))?;
    let (km_wall, km) = timed(|| kmeans_baseline(&points, k, Metric::Euclid, params).map_err(fail))?;

    Ok(BenchResult {
        n,
        k,
        ff_wall_seconds: ff_wall,
        km_wall_seconds: km_wall,
        km_iterations: km.iterations,
        ff_distance_evals: ff.distance_evals,
        km_distance_evals: km.distance_evals,
        labels_agreement: label_agreement(&ff.labels, &km.labels),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_match_closed_forms() {
        let r = bench_compare(200, 4, 3, 7).unwrap();
        assert_eq!(r.ff_distance_evals, 2 * 200 * 4);
        assert_eq!(r.km_distance_evals, 200 * 4 * (r.km_iterations as u64 + 1));
        assert!(r.km_iterations >= 3);
        assert!((0.0..=1.0).contains(&r.labels_agreement));
    }

    #[test]
    fn rejects_k_above_n() {
        assert_eq!(bench_compare(3, 5, 1, 0).unwrap_err().exit_code(), 1);
    }
}
