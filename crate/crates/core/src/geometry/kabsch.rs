use nalgebra::Matrix3;

use super::transform::argmin;
use super::{RigidTransform, Vec3};
use crate::error::{Error, Result};

/// Least-squares rigid transform mapping `source[i]` onto `target[i]`.
pub fn kabsch_align(source: &[Vec3], target: &[Vec3]) -> Result<RigidTransform> {
    kabsch_weighted(source, target, None)
}

/// Weighted variant of [`kabsch_align`]; `weights` must be non-negative.
pub fn kabsch_weighted(source: &[Vec3], target: &[Vec3], weights: Option<&[f64]>) -> Result<RigidTransform> {
    if source.len() != target.len() {
        return Err(Error::InvalidArgument(format!("{} source vs {} target points", source.len(), target.len())));
    }
    if source.len() < 3 {
        return Err(Error::DegenerateInput(format!("{} pairs, need at least 3", source.len())));
    }
    let weight = |i: usize| weights.map_or(1.0, |w| w[i]);
    let total: f64 = (0..source.len()).map(weight).sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateInput("all weights are zero".into()));
    }
    let mut src_mean = Vec3::zeros();
    let mut dst_mean = Vec3::zeros();
    for i in 0..source.len() {
        src_mean += source[i] * weight(i);
        dst_mean += target[i] * weight(i);
    }
    src_mean /= total;
    dst_mean /= total;

    let mut h = Matrix3::zeros();
    for i in 0..source.len() {
        h += (source[i] - src_mean) * (target[i] - dst_mean).transpose() * weight(i);
    }
    let rotation = rotation_from_covariance(&h)?;
    Ok(RigidTransform::new(rotation, dst_mean - rotation * src_mean))
}

/// Rotation `R = V Uᵀ` maximizing `tr(R H)` for `H = U Σ Vᵀ`, reflection-corrected.
pub fn rotation_from_covariance(h: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    let svd = h.svd(true, true);
    let sv = svd.singular_values;
    let largest = sv.max();
    let mut sorted = [sv[0], sv[1], sv[2]];
    sorted.sort_by(f64::total_cmp);
    if !(largest > 0.0) || !(sorted[1] > 1e-12 * largest) {
        return Err(Error::DegenerateInput("rank-deficient cross-covariance".into()));
    }
    let u = svd.u.expect("svd u");
    let mut v = svd.v_t.expect("svd v_t").transpose();
    let mut r = v * u.transpose();
    if r.determinant() < 0.0 {
        // flip the column of V paired with the smallest singular value
        let imin = argmin(sv.as_slice());
        v.column_mut(imin).neg_mut();
        r = v * u.transpose();
    }
    Ok(r)
}
