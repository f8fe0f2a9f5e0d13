use super::{NeighborIndex, PointCloud, RigidTransform};
use crate::error::{Error, Result};

/// How source points are paired with target points when measuring alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pairing {
    IndexMatched,
    NearestNeighbor,
}

/// Root-mean-square residual (mm) after mapping `source` by `transform`.
pub fn alignment_rmse(source: &PointCloud, target: &PointCloud, transform: &RigidTransform, pairing: Pairing) -> Result<f64> {
    source.ensure_non_empty()?;
    target.ensure_non_empty()?;
    let sum: f64 = match pairing {
        Pairing::IndexMatched => {
            if source.len() != target.len() {
                return Err(Error::InvalidArgument(format!("index-matched RMSE needs equal sizes ({} vs {})", source.len(), target.len())));
            }
            source.points.iter().zip(&target.points).map(|(p, q)| (transform.apply(p) - q).norm_squared()).sum()
        }
        Pairing::NearestNeighbor => {
            let index = NeighborIndex::new(&target.points);
            source.points.iter().map(|p| index.nearest(&transform.apply(p)).expect("non-empty").1).sum()
        }
    };
    Ok((sum / source.len() as f64).sqrt())
}
