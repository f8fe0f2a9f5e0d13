use std::collections::HashMap;

use super::{bounds, PointCloud, Vec3};

type VoxelKey = (i64, i64, i64);

fn voxel_key(p: &Vec3, origin: &Vec3, edge: f64) -> VoxelKey {
    let q = (p - origin) / edge;
    (q.x.floor() as i64, q.y.floor() as i64, q.z.floor() as i64)
}

/// Centroid of every occupied voxel of edge `edge`, ordered by voxel key.
///
/// Voxels are anchored at the cloud's minimum corner. Normals are averaged and
/// re-normalized, curvatures averaged.
pub fn voxel_grid(cloud: &PointCloud, edge: f64) -> PointCloud {
    let Some((origin, _)) = bounds(&cloud.points) else {
        return cloud.clone();
    };
    let mut slots: HashMap<VoxelKey, usize> = HashMap::new();
    let mut buckets: Vec<(VoxelKey, Vec<usize>)> = Vec::new();
    for (i, p) in cloud.points.iter().enumerate() {
        let key = voxel_key(p, &origin, edge);
        let slot = *slots.entry(key).or_insert_with(|| {
            buckets.push((key, Vec::new()));
            buckets.len() - 1
        });
        buckets[slot].1.push(i);
    }
    buckets.sort_by_key(|(k, _)| *k);

    let mean =
        |members: &[usize], f: &dyn Fn(usize) -> Vec3| members.iter().fold(Vec3::zeros(), |acc, &i| acc + f(i)) / members.len() as f64;
    let points = buckets.iter().map(|(_, m)| mean(m, &|i| cloud.points[i])).collect();
    let normals = cloud
        .normals
        .as_ref()
        .map(|normals| buckets.iter().map(|(_, m)| mean(m, &|i| normals[i]).try_normalize(1e-12).unwrap_or_else(Vec3::zeros)).collect());
    let curvatures =
        cloud.curvatures.as_ref().map(|c| buckets.iter().map(|(_, m)| m.iter().map(|&i| c[i]).sum::<f64>() / m.len() as f64).collect());
    let mut out = cloud.clone();
    out.points = points;
    out.normals = normals;
    out.curvatures = curvatures;
    out
}

fn occupied(cloud: &PointCloud, edge: f64) -> usize {
    let origin = bounds(&cloud.points).expect("non-empty").0;
    let mut keys: Vec<VoxelKey> = cloud.points.iter().map(|p| voxel_key(p, &origin, edge)).collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

/// Voxel-centroid downsampling to roughly `target_count` points.
///
/// The voxel edge is bisected (geometrically) until the output size is within
/// ±10% of the target; clouds already at or below the target are returned as-is.
pub fn voxel_downsample(cloud: &PointCloud, target_count: usize) -> PointCloud {
    let target = target_count.max(1);
    if cloud.len() <= target {
        return cloud.clone();
    }
    let edge = downsample_edge(cloud, target);
    voxel_grid(cloud, edge)
}

/// Voxel edge length selected by [`voxel_downsample`].
pub fn downsample_edge(cloud: &PointCloud, target: usize) -> f64 {
    let (lo, hi) = bounds(&cloud.points).expect("non-empty");
    let diag = (hi - lo).norm().max(1e-9);
    let tolerance = (target as f64 * 0.1).max(0.5);
    // count(small) >= target >= count(large)
    let mut small = diag * 1e-7;
    let mut large = diag * 2.0;
    let mut best = (large, usize::MAX);
    for _ in 0..80 {
        let mid = (small * large).sqrt();
        let n = occupied(cloud, mid);
        let miss = (n as f64 - target as f64).abs();
        if miss < (best.1 as f64 - target as f64).abs() {
            best = (mid, n);
        }
        if miss <= tolerance {
            return mid;
        }
        if n > target {
            small = mid;
        } else {
            large = mid;
        }
        if large / small < 1.0 + 1e-12 {
            break;
        }
    }
    best.0
}
