use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{voxel_downsample, NeighborIndex, PointCloud, RigidTransform, Vec3};

/// Points in every generated target.
pub const TARGET_POINTS: usize = 8000;
pub const OVERLAP_TOLERANCE: f64 = 0.02;
pub const MAX_TRANSLATION: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseParams {
    pub mesh_id: String,
    pub overlap_ratio: f64,
    pub rotation_deg: f64,
    pub noise_sigma: f64,
    pub partial_fraction: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestCase {
    pub source: PointCloud,
    pub target: PointCloud,
    /// Maps `source` back into the target frame.
    pub ground_truth: RigidTransform,
    pub params: CaseParams,
    /// Source positions before noise, in the source frame.
    pub clean_source: PointCloud,
    /// Shared-support fraction reached by the crop.
    pub achieved_overlap: f64,
}

impl TestCase {
    /// Clean source positions mapped into the target frame.
    pub fn clean_in_target(&self) -> PointCloud {
        self.clean_source.transformed(&self.ground_truth)
    }
}

/// Fraction of `target` points within `radius` of some point of `support`.
pub fn shared_support(support: &[Vec3], target: &[Vec3], radius: f64) -> f64 {
    if support.is_empty() || target.is_empty() {
        return 0.0;
    }
    let index = NeighborIndex::new(support);
    let hit = target.iter().filter(|q| index.nearest_within(q, radius).is_some()).count();
    hit as f64 / target.len() as f64
}

fn uniform_axis(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
        if let Some(u) = v.try_normalize(1e-9) {
            return u;
        }
    }
}

/// Half-space crop `{p : d·p ≥ s}` whose shared support with `target` is within
/// tolerance of `overlap`; `s` is bisected.
fn overlap_crop(target: &PointCloud, overlap: f64, direction: &Vec3, radius: f64) -> Result<(Vec<usize>, f64)> {
    let proj: Vec<f64> = target.points.iter().map(|p| direction.dot(p)).collect();
    let crop = |s: f64| -> Vec<usize> { (0..proj.len()).filter(|&i| proj[i] >= s).collect() };
    let measure = |idx: &[usize]| {
        let pts: Vec<Vec3> = idx.iter().map(|&i| target.points[i]).collect();
        shared_support(&pts, &target.points, radius)
    };
    let mut lo = proj.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut hi = proj.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let all = crop(lo);
    let full = measure(&all);
    if (full - overlap).abs() <= OVERLAP_TOLERANCE || overlap >= 1.0 {
        return Ok((all, full));
    }
    let mut closest = (f64::INFINITY, full);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let idx = crop(mid);
        let f = measure(&idx);
        if (f - overlap).abs() < closest.0 {
            closest = ((f - overlap).abs(), f);
        }
        if (f - overlap).abs() <= OVERLAP_TOLERANCE {
            return Ok((idx, f));
        }
        // larger offset keeps fewer points
        if f > overlap {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::OverlapUnachievable { requested: overlap, achieved: closest.1 })
}

/// Builds one synthetic registration case from a mesh.
///
/// The target is the mesh downsampled to 8k points. The source is a
/// half-space crop of the target reaching the requested shared support,
/// randomly thinned to `partial_fraction`, perturbed by Gaussian noise and
/// moved by a rotation of exactly `rotation_deg` plus a translation within
/// ±50 mm per axis.
pub fn generate_test_case(
    mesh: &PointCloud,
    overlap: f64,
    rotation_deg: f64,
    noise_sigma: f64,
    partial_fraction: f64,
    seed: u64,
) -> Result<TestCase> {
    if !(overlap > 0.0 && overlap <= 1.0) {
        return Err(Error::InvalidArgument(format!("overlap must lie in (0, 1], got {overlap}")));
    }
    if !(rotation_deg >= 0.0) || !(noise_sigma >= 0.0) || !(partial_fraction > 0.0 && partial_fraction <= 1.0) {
        return Err(Error::InvalidArgument("rotation, noise and partial fraction out of range".into()));
    }
    if mesh.len() < 1000 {
        return Err(Error::InvalidArgument(format!("mesh needs at least 1000 points, has {}", mesh.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut target = voxel_downsample(mesh, TARGET_POINTS);
    target.normals = None;
    target.curvatures = None;
    target.id = mesh.id.clone();

    let direction = uniform_axis(&mut rng);
    let (cropped, achieved) = overlap_crop(&target, overlap, &direction, (3.0 * noise_sigma).max(1e-9))?;

    let keep = ((cropped.len() as f64 * partial_fraction).round() as usize).clamp(1, cropped.len());
    let mut chosen: Vec<usize> = if keep == cropped.len() {
        cropped
    } else {
        index::sample(&mut rng, cropped.len(), keep).into_iter().map(|k| cropped[k]).collect()
    };
    chosen.sort_unstable();
    let clean: Vec<Vec3> = chosen.iter().map(|&i| target.points[i]).collect();
    let noisy: Vec<Vec3> = if noise_sigma > 0.0 {
        let normal = Normal::new(0.0, noise_sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        clean.iter().map(|p| p + Vec3::new(normal.sample(&mut rng), normal.sample(&mut rng), normal.sample(&mut rng))).collect()
    } else {
        clean.clone()
    };

    let axis = uniform_axis(&mut rng);
    let shift = Vec3::new(
        rng.random_range(-MAX_TRANSLATION..=MAX_TRANSLATION),
        rng.random_range(-MAX_TRANSLATION..=MAX_TRANSLATION),
        rng.random_range(-MAX_TRANSLATION..=MAX_TRANSLATION),
    );
    let motion = RigidTransform::from_axis_angle(&axis, rotation_deg.to_radians(), shift);
    let source = PointCloud::new(noisy.iter().map(|p| motion.apply(p)).collect()).with_id(format!("{}-source", mesh.id));
    let clean_source = PointCloud::new(clean.iter().map(|p| motion.apply(p)).collect());
    Ok(TestCase {
        source,
        target,
        ground_truth: motion.inverse(),
        params: CaseParams { mesh_id: mesh.id.clone(), overlap_ratio: overlap, rotation_deg, noise_sigma, partial_fraction, seed },
        clean_source,
        achieved_overlap: achieved,
    })
}
