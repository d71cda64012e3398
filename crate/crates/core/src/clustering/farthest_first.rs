use super::{
    assign, validate, Centroid, ClusterAlgorithm, ClusterError, ClusterModel, DistanceCounter,
    FeaturePoint, Metric,
};

/// Farthest-first traversal (greedy k-center).
///
/// The first center is the point farthest from the coordinate-wise mean.
/// Each further center is the point whose distance to its nearest chosen
/// center is largest. Selection stops early once every point coincides with
/// a center. All ties go to the lowest input index.
///
/// Distance evaluations: `n` for the seed, `n` per additional center, and
/// `n * centers` for the final assignment.
pub fn farthest_first(
    points: &[FeaturePoint],
    k: usize,
    metric: Metric,
) -> Result<ClusterModel, ClusterError> {
    validate(points, k)?;
    let n = points.len();
    let mut counter = DistanceCounter::new(metric);

    let mean = FeaturePoint::new(
        usize::MAX,
        points.iter().map(|p| p.s).sum::<f64>() / n as f64,
        points.iter().map(|p| p.c).sum::<f64>() / n as f64,
    );
    let mut seed = 0;
    let mut seed_d = f64::NEG_INFINITY;
    for (i, p) in points.iter().enumerate() {
        let d = counter.distance(p, &mean);
        if d > seed_d {
            seed = i;
            seed_d = d;
        }
    }

    let mut chosen = vec![seed];
    let mut nearest = vec![f64::INFINITY; n];
    while chosen.len() < k {
        let newest = points[*chosen.last().expect("seeded")];
        let mut next = 0;
        let mut next_d = f64::NEG_INFINITY;
        for (i, p) in points.iter().enumerate() {
            let d = counter.distance(p, &newest);
            if d < nearest[i] {
                nearest[i] = d;
            }
            if nearest[i] > next_d {
                next = i;
                next_d = nearest[i];
            }
        }
        if next_d <= 0.0 {
            break;
        }
        chosen.push(next);
    }

    let centers: Vec<Centroid> = chosen.iter().map(|&i| Centroid::from(&points[i])).collect();
    let labels = assign(points, &centers, &mut counter);
    Ok(ClusterModel {
        algorithm: FarthestFirst::NAME.to_string(),
        k,
        centers,
        center_indices: chosen,
        page_ids: points.iter().map(|p| p.page_id).collect(),
        labels,
        metric,
        distance_evals: counter.evals(),
        iterations: 0,
    })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct FarthestFirst;

impl FarthestFirst {
    pub const NAME: &'static str = "farthest_first";
}

impl ClusterAlgorithm for FarthestFirst {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn fit(
        &self,
        points: &[FeaturePoint],
        k: usize,
        metric: Metric,
    ) -> Result<ClusterModel, ClusterError> {
        farthest_first(points, k, metric)
    }
}
