use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::CoarseConfig;
use crate::error::{Error, Result};
use crate::features::CorrespondenceSet;
use crate::geometry::{PointCloud, Vec3};

/// Edges shorter than this (mm) carry no rotation or scale information.
pub const MIN_EDGE_LENGTH: f64 = 1e-6;

/// Translation-invariant measurements over pairs of correspondences.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimSet {
    /// `(i, k)` indices into the correspondence set, `i < k`.
    pub edges: Vec<(usize, usize)>,
    pub delta_p: Vec<Vec3>,
    pub delta_q: Vec<Vec3>,
    pub weights: Vec<f64>,
    /// Scale-ratio bound `α` per edge (dimensionless).
    pub scale_bounds: Vec<f64>,
    /// Rotation residual bound `δ` per edge (mm).
    pub rotation_bounds: Vec<f64>,
}

impl TimSet {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn subset(&self, keep: &[usize]) -> TimSet {
        TimSet {
            edges: keep.iter().map(|&e| self.edges[e]).collect(),
            delta_p: keep.iter().map(|&e| self.delta_p[e]).collect(),
            delta_q: keep.iter().map(|&e| self.delta_q[e]).collect(),
            weights: keep.iter().map(|&e| self.weights[e]).collect(),
            scale_bounds: keep.iter().map(|&e| self.scale_bounds[e]).collect(),
            rotation_bounds: keep.iter().map(|&e| self.rotation_bounds[e]).collect(),
        }
    }

    /// Sorted correspondence indices touched by any edge.
    pub fn nodes(&self) -> Vec<usize> {
        let mut n: Vec<usize> = self.edges.iter().flat_map(|&(i, k)| [i, k]).collect();
        n.sort_unstable();
        n.dedup();
        n
    }

    fn push(&mut self, edge: (usize, usize), dp: Vec3, dq: Vec3, weight: f64, bound: f64) {
        self.edges.push(edge);
        self.scale_bounds.push(bound / dp.norm());
        self.delta_p.push(dp);
        self.delta_q.push(dq);
        self.weights.push(weight);
        self.rotation_bounds.push(bound);
    }
}

/// Correspondence indices kept before building the graph: all of them up to
/// `config.max_correspondences`, otherwise a weight-proportional sample.
pub(crate) fn select_correspondences(corr: &CorrespondenceSet, config: &CoarseConfig) -> Vec<usize> {
    if corr.len() <= config.max_correspondences {
        return (0..corr.len()).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.sampling_seed ^ 0x7153_7153);
    let mut keep: Vec<usize> = index::sample_weighted(&mut rng, corr.len(), |i| corr.weights[i].max(1e-12), config.max_correspondences)
        .map(|v| v.into_vec())
        .unwrap_or_else(|_| (0..config.max_correspondences).collect());
    keep.sort_unstable();
    keep
}

/// Complete graph of pairwise differences over the correspondences.
///
/// Edge weight is `min(wᵢ, wₖ)`; the rotation bound is twice the per-point
/// noise bound since both endpoints carry noise.
pub fn build_tims(corr: &CorrespondenceSet, source: &PointCloud, target: &PointCloud, config: &CoarseConfig) -> Result<TimSet> {
    if corr.len() < 3 {
        return Err(Error::TooFewCorrespondences { found: corr.len(), required: 3 });
    }
    let keep = select_correspondences(corr, config);
    let bound = 2.0 * config.noise_bound;
    let mut tims = TimSet::default();
    for (a, &i) in keep.iter().enumerate() {
        for &k in &keep[a + 1..] {
            let (si, ti) = corr.pairs[i];
            let (sk, tk) = corr.pairs[k];
            let dp = source.points[si] - source.points[sk];
            if dp.norm() < MIN_EDGE_LENGTH {
                continue;
            }
            let dq = target.points[ti] - target.points[tk];
            tims.push((i, k), dp, dq, corr.weights[i].min(corr.weights[k]), bound);
        }
    }
    Ok(tims)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_cloud(n: usize) -> PointCloud {
        PointCloud::new((0..n).map(|i| Vec3::new(i as f64, (i * i) as f64, 0.0)).collect())
    }

    #[test]
    fn complete_graph_counts() {
        let cloud = line_cloud(300);
        let cfg = CoarseConfig::default();
        let three = CorrespondenceSet::from_pairs((0..3).map(|i| (i, i)).collect());
        assert_eq!(build_tims(&three, &cloud, &cloud, &cfg).unwrap().len(), 3);
        let all = CorrespondenceSet::from_pairs((0..300).map(|i| (i, i)).collect());
        assert_eq!(build_tims(&all, &cloud, &cloud, &cfg).unwrap().len(), 44850);
    }

    #[test]
    fn zero_length_edges_are_dropped() {
        let cloud = line_cloud(5);
        // source point 1 used twice: the (1,1) edge has no length
        let corr = CorrespondenceSet::from_pairs(vec![(0, 0), (1, 1), (1, 2), (3, 3)]);
        let tims = build_tims(&corr, &cloud, &cloud, &CoarseConfig::default()).unwrap();
        assert_eq!(tims.len(), 5);
        assert!(tims.delta_p.iter().all(|d| d.norm() > 1e-9));
    }

    #[test]
    fn weights_bounds_and_errors() {
        let cloud = line_cloud(4);
        let mut corr = CorrespondenceSet::from_pairs(vec![(0, 0), (1, 1), (2, 2)]);
        corr.weights = vec![0.5, 2.0, 1.0];
        let cfg = CoarseConfig { noise_bound: 0.5, ..CoarseConfig::default() };
        let tims = build_tims(&corr, &cloud, &cloud, &cfg).unwrap();
        assert_eq!(tims.weights, vec![0.5, 0.5, 1.0]);
        assert!(tims.rotation_bounds.iter().all(|&b| b == 1.0));
        assert!((tims.scale_bounds[0] - 1.0 / 2f64.sqrt()).abs() < 1e-12);
        let two = CorrespondenceSet::from_pairs(vec![(0, 0), (1, 1)]);
        assert!(matches!(build_tims(&two, &cloud, &cloud, &cfg), Err(Error::TooFewCorrespondences { .. })));
    }

    #[test]
    fn oversized_sets_are_subsampled() {
        let cloud = line_cloud(50);
        let corr = CorrespondenceSet::from_pairs((0..50).map(|i| (i, i)).collect());
        let cfg = CoarseConfig { max_correspondences: 10, ..CoarseConfig::default() };
        let tims = build_tims(&corr, &cloud, &cloud, &cfg).unwrap();
        assert_eq!(tims.len(), 45);
        assert_eq!(tims.nodes().len(), 10);
    }
}
