//! Robust point-to-plane ICP, accelerated point-to-point ICP, and scene cropping.

mod fast;
mod refine;

use serde::{Deserialize, Serialize};

pub(crate) use fast::fit_prepared;
pub use fast::icp_fast;
pub use refine::icp_refine;

use crate::error::{Error, Result};
use crate::geometry::{NeighborIndex, PointCloud, RigidTransform, Vec3};

/// Convergence thresholds are this much looser before the final kernel stage.
pub(crate) const COARSE_STAGE_SLACK: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IcpMode {
    RobustPointToPlane,
    FastPointToPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IcpConfig {
    pub mode: IcpMode,
    pub max_iterations: usize,
    pub rotation_tolerance_deg: f64,
    pub translation_tolerance_mm: f64,
    /// Initial Welsch kernel width ν₀ (mm); `None` uses the median initial residual.
    pub kernel_width: Option<f64>,
    /// Final kernel width, about the sensor noise σ (mm).
    pub kernel_min: f64,
    /// ν is multiplied by this factor whenever a stage converges.
    pub anneal_factor: f64,
    /// Correspondences farther than this (mm) are ignored.
    pub max_distance: f64,
    pub anderson_depth: usize,
    /// Wall-clock budget per call (ms); enforced by the fast mode.
    pub budget_ms: Option<f64>,
    /// Nearest-neighbor distance (mm) for counting a source point as an inlier.
    pub inlier_distance: f64,
    pub min_inlier_fraction: f64,
    /// Largest inlier RMSE (mm) still counted as a successful alignment.
    pub success_rmse: f64,
}

impl Default for IcpConfig {
    fn default() -> Self {
        Self {
            mode: IcpMode::RobustPointToPlane,
            max_iterations: 100,
            rotation_tolerance_deg: 1e-4,
            translation_tolerance_mm: 1e-4,
            kernel_width: None,
            kernel_min: 0.33,
            anneal_factor: 0.5,
            max_distance: 10.0,
            anderson_depth: 5,
            budget_ms: Some(250.0),
            inlier_distance: 3.0,
            min_inlier_fraction: 0.3,
            success_rmse: 1.0,
        }
    }
}

impl IcpConfig {
    pub fn fast() -> Self {
        Self {
            mode: IcpMode::FastPointToPoint,
            max_iterations: 50,
            rotation_tolerance_deg: 1e-3,
            translation_tolerance_mm: 1e-3,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be at least 1".into()));
        }
        let positive = [
            self.rotation_tolerance_deg,
            self.translation_tolerance_mm,
            self.kernel_min,
            self.max_distance,
            self.inlier_distance,
            self.success_rmse,
        ];
        if positive.iter().any(|v| !(*v > 0.0)) || self.kernel_width.is_some_and(|v| !(v > 0.0)) {
            return Err(Error::InvalidArgument("ICP thresholds must be positive".into()));
        }
        if !(self.anneal_factor > 0.0 && self.anneal_factor < 1.0) {
            return Err(Error::InvalidArgument("anneal_factor must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// One energy evaluation in the optimization trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcpStep {
    pub iteration: usize,
    /// Kernel stage; energies are comparable only within a stage.
    pub stage: usize,
    pub nu: f64,
    pub energy: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcpResult {
    pub transform: RigidTransform,
    pub iterations: usize,
    /// Mean Welsch energy at the final kernel width.
    pub energy: f64,
    pub final_nu: f64,
    /// RMSE (mm) of inlier nearest-neighbor distances; `None` without inliers.
    pub inlier_rmse: Option<f64>,
    pub inlier_fraction: f64,
    pub converged: bool,
    pub budget_exceeded: bool,
    /// Converged with enough inliers at low enough RMSE.
    pub success: bool,
    #[serde(skip)]
    pub trace: Vec<IcpStep>,
}

/// Scene points inside the axis-aligned box of `pose · model`, grown by `margin` mm.
pub fn crop_aabb(scene: &PointCloud, model: &PointCloud, pose: &RigidTransform, margin: f64) -> Result<PointCloud> {
    if !(margin >= 0.0) {
        return Err(Error::InvalidArgument(format!("margin must be non-negative, got {margin}")));
    }
    model.ensure_non_empty()?;
    let moved: Vec<Vec3> = model.points.iter().map(|p| pose.apply(p)).collect();
    let (lo, hi) = crate::geometry::bounds(&moved).expect("non-empty");
    let m = Vec3::repeat(margin);
    let (lo, hi) = (lo - m, hi + m);
    let keep: Vec<usize> = (0..scene.len())
        .filter(|&i| {
            let p = scene.points[i];
            (0..3).all(|a| p[a] >= lo[a] && p[a] <= hi[a])
        })
        .collect();
    if keep.is_empty() {
        return Err(Error::EmptyCrop);
    }
    Ok(scene.select(&keep))
}

/// Nearest-neighbor pairs of the moved source within the distance cap.
pub(crate) struct Matches {
    pub moved: Vec<Vec3>,
    pub src: Vec<usize>,
    pub tgt: Vec<usize>,
    pub dist2: Vec<f64>,
}

impl Matches {
    pub fn find(source: &[Vec3], index: &NeighborIndex, transform: &RigidTransform, max_distance: f64) -> Matches {
        let moved: Vec<Vec3> = source.iter().map(|p| transform.apply(p)).collect();
        let mut m = Matches { src: Vec::new(), tgt: Vec::new(), dist2: Vec::new(), moved: Vec::new() };
        for (i, p) in moved.iter().enumerate() {
            if let Some((j, d2)) = index.nearest_within(p, max_distance) {
                m.src.push(i);
                m.tgt.push(j);
                m.dist2.push(d2);
            }
        }
        m.moved = moved;
        m
    }

    pub fn len(&self) -> usize {
        self.src.len()
    }
}

/// Mean Welsch energy; source points without a match contribute 1.
pub(crate) fn welsch_energy(residuals2: impl Iterator<Item = f64>, total: usize, nu: f64) -> f64 {
    let mut matched = 0usize;
    let mut sum = 0.0;
    for r2 in residuals2 {
        matched += 1;
        sum -= (-r2 / (2.0 * nu * nu)).exp_m1();
    }
    (sum + (total - matched) as f64) / total as f64
}

pub(crate) fn median(values: impl Iterator<Item = f64>) -> Option<f64> {
    let mut v: Vec<f64> = values.collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some(v[(v.len() - 1) / 2])
}

/// Fills the inlier statistics and the success flag.
pub(crate) fn finish(mut result: IcpResult, matches: &Matches, total: usize, config: &IcpConfig) -> IcpResult {
    let lim2 = config.inlier_distance * config.inlier_distance;
    let inliers: Vec<f64> = matches.dist2.iter().copied().filter(|&d2| d2 <= lim2).collect();
    result.inlier_fraction = inliers.len() as f64 / total as f64;
    result.inlier_rmse = (!inliers.is_empty()).then(|| (inliers.iter().sum::<f64>() / inliers.len() as f64).sqrt());
    result.success = result.converged
        && result.inlier_fraction >= config.min_inlier_fraction
        && result.inlier_rmse.is_some_and(|r| r <= config.success_rmse);
    result
}

/// Inlier statistics of `transform` without optimizing.
pub fn evaluate_alignment(
    source: &PointCloud,
    target: &PointCloud,
    transform: &RigidTransform,
    config: &IcpConfig,
) -> Result<(f64, Option<f64>)> {
    source.ensure_non_empty()?;
    target.ensure_non_empty()?;
    let index = NeighborIndex::new(&target.points);
    let m = Matches::find(&source.points, &index, transform, config.inlier_distance);
    let fraction = m.len() as f64 / source.len() as f64;
    let rmse = (m.len() > 0).then(|| (m.dist2.iter().sum::<f64>() / m.len() as f64).sqrt());
    Ok((fraction, rmse))
}
