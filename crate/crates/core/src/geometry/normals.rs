//! Local PCA: normals and surface variation.

use super::plane::{covariance, sorted_eigen, RANK_TOLERANCE};
use super::{centroid, NeighborIndex, PointCloud, Vec3};
use crate::error::{Error, Result};

/// How estimated normals are oriented.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormalOrientation {
    /// Flip each normal to face the viewpoint.
    TowardViewpoint(Vec3),
    /// Flip each normal to point away from the cloud centroid.
    AwayFromCentroid,
}

impl Default for NormalOrientation {
    fn default() -> Self {
        NormalOrientation::TowardViewpoint(Vec3::zeros())
    }
}

/// Output of local PCA for one cloud.
#[derive(Debug, Clone)]
pub struct LocalShape {
    /// Unit normal per point, zero where the neighborhood was collinear.
    pub normals: Vec<Vec3>,
    /// Surface variation `λ₀ / (λ₀ + λ₁ + λ₂)` per point.
    pub curvatures: Vec<f64>,
    /// Points whose neighborhood was degenerate.
    pub degenerate: Vec<usize>,
}

fn check_k(cloud: &PointCloud, k: usize) -> Result<()> {
    cloud.ensure_non_empty()?;
    if k < 3 || cloud.len() < k {
        return Err(Error::InvalidArgument(format!("need 3 <= k <= cloud size, got k={k} for {} points", cloud.len())));
    }
    Ok(())
}

/// PCA over the `k` nearest neighbors (the point itself included) of every point.
pub fn local_shape(cloud: &PointCloud, k: usize, orientation: NormalOrientation) -> Result<LocalShape> {
    check_k(cloud, k)?;
    let index = NeighborIndex::new(&cloud.points);
    let center = centroid(&cloud.points).expect("non-empty");
    let mut normals = Vec::with_capacity(cloud.len());
    let mut curvatures = Vec::with_capacity(cloud.len());
    let mut degenerate = Vec::new();
    let mut neighborhood = Vec::with_capacity(k);
    for (i, p) in cloud.points.iter().enumerate() {
        neighborhood.clear();
        neighborhood.extend(index.knn(p, k).into_iter().map(|(j, _)| cloud.points[j]));
        let mean = centroid(&neighborhood).expect("k >= 3");
        let (values, vectors) = sorted_eigen(&covariance(&neighborhood, &mean));
        let values = values.map(|v| v.max(0.0));
        if !(values[1] > RANK_TOLERANCE * values[2].max(f64::MIN_POSITIVE)) {
            degenerate.push(i);
            normals.push(Vec3::zeros());
            curvatures.push(0.0);
            continue;
        }
        let mut n = vectors[0].normalize();
        let facing = match orientation {
            NormalOrientation::TowardViewpoint(view) => n.dot(&(view - p)),
            NormalOrientation::AwayFromCentroid => n.dot(&(p - center)),
        };
        if facing < 0.0 {
            n = -n;
        }
        normals.push(n);
        let total = values[0] + values[1] + values[2];
        curvatures.push(if total > 0.0 { values[0] / total } else { 0.0 });
    }
    Ok(LocalShape { normals, curvatures, degenerate })
}

/// Returns `cloud` with PCA normals; collinear neighborhoods get a null (zero) normal.
pub fn estimate_normals(cloud: &PointCloud, k: usize, orientation: NormalOrientation) -> Result<PointCloud> {
    let shape = local_shape(cloud, k, orientation)?;
    Ok(cloud.clone().with_normals(shape.normals))
}

/// Returns `cloud` with surface-variation curvatures in `[0, 1/3]`.
pub fn estimate_curvature(cloud: &PointCloud, k: usize) -> Result<PointCloud> {
    let shape = local_shape(cloud, k, NormalOrientation::default())?;
    Ok(cloud.clone().with_curvatures(shape.curvatures))
}

/// Normals and curvatures in one neighborhood pass.
pub fn estimate_normals_and_curvature(cloud: &PointCloud, k: usize, orientation: NormalOrientation) -> Result<PointCloud> {
    let shape = local_shape(cloud, k, orientation)?;
    Ok(cloud.clone().with_normals(shape.normals).with_curvatures(shape.curvatures))
}
