use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;

/// Draws `n` distinct point indices with probability proportional to curvature.
///
/// Sampling is without replacement (successive draws renormalize over the
/// remaining points). When fewer than `n` points have positive curvature the
/// remainder is drawn uniformly from the flat points; an all-flat cloud
/// reduces to uniform sampling. Indices are returned in ascending order.
pub fn curvature_weighted_sample(cloud: &PointCloud, n: usize, seed: u64) -> Result<Vec<usize>> {
    let curvatures =
        cloud.curvatures.as_ref().ok_or_else(|| Error::InvalidArgument("curvature-weighted sampling needs curvatures".into()))?;
    if n == 0 || n > cloud.len() {
        return Err(Error::InvalidArgument(format!("cannot sample {n} of {} points", cloud.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positive: Vec<usize> = (0..curvatures.len()).filter(|&i| curvatures[i] > 0.0 && curvatures[i].is_finite()).collect();
    let mut picked: Vec<usize> = if positive.len() >= n {
        index::sample_weighted(&mut rng, positive.len(), |j| curvatures[positive[j]], n)
            .map_err(|e| Error::InvalidArgument(format!("sampling weights: {e}")))?
            .into_iter()
            .map(|j| positive[j])
            .collect()
    } else {
        let flat: Vec<usize> = (0..curvatures.len()).filter(|&i| !(curvatures[i] > 0.0 && curvatures[i].is_finite())).collect();
        let extra = index::sample(&mut rng, flat.len(), n - positive.len());
        positive.iter().copied().chain(extra.into_iter().map(|j| flat[j])).collect()
    };
    picked.sort_unstable();
    Ok(picked)
}
