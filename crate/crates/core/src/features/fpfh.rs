//! Fast Point Feature Histograms.
//!
//! Each descriptor has three 11-bin sub-histograms over the Darboux-frame
//! angles `(f1, f2, f3)` of point pairs. A point's simplified histogram (SPFH)
//! covers pairs with its radius neighbors; the FPFH adds the distance-weighted
//! average of the neighbors' SPFHs, and each sub-histogram is scaled to sum 100.

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{NeighborIndex, PointCloud, Vec3};

pub const BINS_PER_FEATURE: usize = 11;
pub const DESCRIPTOR_LEN: usize = 3 * BINS_PER_FEATURE;

pub type Histogram = [f64; DESCRIPTOR_LEN];

/// FPFH descriptors for a subset of a cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet {
    pub descriptors: Vec<Histogram>,
    /// Index of each descriptor's point in the parent cloud.
    pub source_indices: Vec<usize>,
    /// Points without any neighbor inside the radius; their descriptor is zero.
    pub isolated: Vec<bool>,
}

impl DescriptorSet {
    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }

    pub fn isolated_count(&self) -> usize {
        self.isolated.iter().filter(|&&b| b).count()
    }
}

/// Angular features `(f1, f2, f3)` of an oriented point pair, or `None` for coincident points.
pub(crate) fn pair_features(p1: &Vec3, n1: &Vec3, p2: &Vec3, n2: &Vec3) -> Option<(f64, f64, f64)> {
    let mut dp = p2 - p1;
    let dist = dp.norm();
    if dist == 0.0 {
        return None;
    }
    let angle1 = n1.dot(&dp) / dist;
    let angle2 = n2.dot(&dp) / dist;
    let (src_n, tgt_n, f3) = if angle1.abs().acos() > angle2.abs().acos() {
        dp = -dp;
        (n2, n1, -angle2)
    } else {
        (n1, n2, angle1)
    };
    let v = dp.cross(src_n);
    let v_norm = v.norm();
    if v_norm == 0.0 {
        return Some((0.0, 0.0, f3));
    }
    let v = v / v_norm;
    let w = src_n.cross(&v);
    let f2 = v.dot(tgt_n);
    let f1 = w.dot(tgt_n).atan2(src_n.dot(tgt_n));
    Some((f1, f2, f3))
}

fn bin(value: f64, lo: f64, hi: f64) -> usize {
    let b = ((value - lo) / (hi - lo) * BINS_PER_FEATURE as f64).floor();
    b.clamp(0.0, (BINS_PER_FEATURE - 1) as f64) as usize
}

struct Context<'a> {
    cloud: &'a PointCloud,
    normals: &'a [Vec3],
    index: NeighborIndex,
    radius: f64,
}

impl Context<'_> {
    /// Neighbors within the radius, excluding `i` itself and points without normals.
    fn neighbors(&self, i: usize) -> Vec<(usize, f64)> {
        self.index
            .within_radius(&self.cloud.points[i], self.radius)
            .into_iter()
            .filter(|&(j, d2)| j != i && d2 > 0.0 && self.normals[j] != Vec3::zeros())
            .collect()
    }

    fn spfh(&self, i: usize, neighbors: &[(usize, f64)]) -> Histogram {
        let mut h = [0.0; DESCRIPTOR_LEN];
        let (p, n) = (self.cloud.points[i], self.normals[i]);
        if neighbors.is_empty() || n == Vec3::zeros() {
            return h;
        }
        let increment = 100.0 / neighbors.len() as f64;
        for &(j, _) in neighbors {
            if let Some((f1, f2, f3)) = pair_features(&p, &n, &self.cloud.points[j], &self.normals[j]) {
                h[bin(f1, -PI, PI)] += increment;
                h[BINS_PER_FEATURE + bin(f2, -1.0, 1.0)] += increment;
                h[2 * BINS_PER_FEATURE + bin(f3, -1.0, 1.0)] += increment;
            }
        }
        h
    }
}

/// FPFH descriptors for the points `indices` of `cloud` over neighborhoods of `radius` mm.
pub fn compute_fpfh(cloud: &PointCloud, indices: &[usize], radius: f64) -> Result<DescriptorSet> {
    let normals = cloud.normals.as_deref().ok_or_else(|| Error::InvalidArgument("FPFH needs normals".into()))?;
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!("FPFH radius must be positive, got {radius}")));
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= cloud.len()) {
        return Err(Error::InvalidArgument(format!("index {bad} out of range")));
    }
    let ctx = Context { cloud, normals, index: NeighborIndex::new(&cloud.points), radius };
    let mut spfh_cache: HashMap<usize, Histogram> = HashMap::new();
    let mut spfh_of = |j: usize, ctx: &Context| -> Histogram {
        *spfh_cache.entry(j).or_insert_with(|| {
            let nb = ctx.neighbors(j);
            ctx.spfh(j, &nb)
        })
    };

    let mut descriptors = Vec::with_capacity(indices.len());
    let mut isolated = Vec::with_capacity(indices.len());
    for &i in indices {
        let nb = ctx.neighbors(i);
        if nb.is_empty() || normals[i] == Vec3::zeros() {
            descriptors.push([0.0; DESCRIPTOR_LEN]);
            isolated.push(true);
            continue;
        }
        let own = spfh_of(i, &ctx);
        let mut mixed = [0.0; DESCRIPTOR_LEN];
        let mut total_weight = 0.0;
        for &(j, d2) in &nb {
            let w = 1.0 / d2;
            total_weight += w;
            let h = spfh_of(j, &ctx);
            for (m, v) in mixed.iter_mut().zip(h.iter()) {
                *m += w * v;
            }
        }
        let mut h = [0.0; DESCRIPTOR_LEN];
        for b in 0..DESCRIPTOR_LEN {
            h[b] = own[b] + mixed[b] / total_weight;
        }
        for chunk in h.chunks_mut(BINS_PER_FEATURE) {
            let sum: f64 = chunk.iter().sum();
            if sum > 0.0 {
                chunk.iter_mut().for_each(|v| *v *= 100.0 / sum);
            }
        }
        descriptors.push(h);
        isolated.push(false);
    }
    Ok(DescriptorSet { descriptors, source_indices: indices.to_vec(), isolated })
}

pub fn descriptor_distance(a: &Histogram, b: &Histogram) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{estimate_normals, NormalOrientation, RigidTransform};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bumpy(n: usize, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = (0..n)
            .map(|_| {
                let x: f64 = rng.random_range(-20.0..20.0);
                let y: f64 = rng.random_range(-20.0..20.0);
                Vec3::new(x, y, 4.0 * (x / 6.0).sin() * (y / 9.0).cos())
            })
            .collect();
        estimate_normals(&PointCloud::new(pts), 12, NormalOrientation::TowardViewpoint(Vec3::new(0.0, 0.0, 100.0))).unwrap()
    }

    fn l1(a: &Histogram, b: &Histogram) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
    }

    #[test]
    fn rigid_motion_leaves_descriptors_unchanged() {
        let cloud = bumpy(1500, 1);
        let motion = RigidTransform::from_axis_angle(&Vec3::new(0.3, -1.0, 0.5), 1.1, Vec3::new(40.0, -7.0, 12.0));
        let moved = cloud.transformed(&motion);
        let idx: Vec<usize> = (0..1500).step_by(37).collect();
        let a = compute_fpfh(&cloud, &idx, 5.0).unwrap();
        let b = compute_fpfh(&moved, &idx, 5.0).unwrap();
        for (x, y) in a.descriptors.iter().zip(&b.descriptors) {
            assert!(l1(x, y) < 1e-6, "{}", l1(x, y));
        }
        assert_eq!(a.isolated_count(), 0);
        for d in &a.descriptors {
            for chunk in d.chunks(BINS_PER_FEATURE) {
                assert!((chunk.iter().sum::<f64>() - 100.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn flat_interior_descriptors_agree() {
        let pts: Vec<Vec3> = (0..30).flat_map(|i| (0..30).map(move |j| Vec3::new(i as f64, j as f64, 0.0))).collect();
        let cloud = estimate_normals(&PointCloud::new(pts), 8, NormalOrientation::default()).unwrap();
        let interior: Vec<usize> = (0..900).filter(|i| (8..22).contains(&(i / 30)) && (8..22).contains(&(i % 30))).collect();
        let set = compute_fpfh(&cloud, &interior, 3.0).unwrap();
        for d in &set.descriptors {
            assert!(l1(d, &set.descriptors[0]) < 1e-6);
        }
    }

    #[test]
    fn small_radius_isolates_everything() {
        let pts: Vec<Vec3> = (0..10).flat_map(|i| (0..10).map(move |j| Vec3::new(2.0 * i as f64, 2.0 * j as f64, 0.0))).collect();
        let cloud = estimate_normals(&PointCloud::new(pts), 8, NormalOrientation::default()).unwrap();
        let idx: Vec<usize> = (0..100).collect();
        let set = compute_fpfh(&cloud, &idx, 1.0).unwrap();
        assert_eq!(set.isolated_count(), 100);
        assert!(set.descriptors.iter().all(|d| d.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn requires_normals_and_positive_radius() {
        let cloud = PointCloud::new(vec![Vec3::zeros(); 4]);
        assert!(compute_fpfh(&cloud, &[0], 1.0).is_err());
        let cloud = bumpy(50, 2);
        assert!(compute_fpfh(&cloud, &[0], 0.0).is_err());
        assert!(compute_fpfh(&cloud, &[99], 1.0).is_err());
    }
}
