//! Depth-error profiling against planar references and region-specific rigid correction.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{fit_plane_least_squares, kabsch_align, NeighborIndex, Plane, PointCloud, RigidTransform, Vec3};

pub const DEFAULT_REGION_RADIUS: f64 = 70.0;
pub const DEFAULT_NEIGHBORHOOD_RADIUS: f64 = 20.0;

/// Ball of scene space a correction applies to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionSpec {
    pub center: Vec3,
    /// mm
    pub radius: f64,
}

impl RegionSpec {
    pub fn new(center: Vec3, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidArgument(format!("region radius must be positive, got {radius}")));
        }
        Ok(Self { center, radius })
    }

    pub fn with_default_radius(center: Vec3) -> Self {
        Self { center, radius: DEFAULT_REGION_RADIUS }
    }

    /// Closed-ball membership.
    pub fn contains(&self, p: &Vec3) -> bool {
        (p - self.center).norm() <= self.radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub median: f64,
    pub iqr: f64,
    pub max: f64,
}

impl ErrorSummary {
    /// Median, interquartile range (linearly interpolated quartiles) and maximum.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = p * (v.len() - 1) as f64;
            let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        };
        Some(Self { median: q(0.5), iqr: q(0.75) - q(0.25), max: v[v.len() - 1] })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthErrorProfile {
    /// Distance (mm) of each neighborhood point to its projection on the plane.
    pub errors: Vec<f64>,
    /// Scene indices the errors belong to.
    pub indices: Vec<usize>,
    pub summary: ErrorSummary,
    pub plane: Plane,
    pub neighborhood_radius: f64,
}

/// Depth error of scene points near planar reference points.
///
/// Fits a plane to `reference_points`, collects scene points within
/// `neighborhood_radius` of any reference, and measures each one's distance
/// to its orthogonal projection onto the plane.
pub fn profile_depth_error(scene: &PointCloud, reference_points: &[Vec3], neighborhood_radius: f64) -> Result<DepthErrorProfile> {
    if !(neighborhood_radius > 0.0) {
        return Err(Error::InvalidArgument(format!("neighborhood radius must be positive, got {neighborhood_radius}")));
    }
    let plane = fit_plane_least_squares(reference_points)?;
    let refs = NeighborIndex::new(reference_points);
    let mut indices = Vec::new();
    let mut errors = Vec::new();
    for (i, p) in scene.points.iter().enumerate() {
        if refs.nearest_within(p, neighborhood_radius).is_some() {
            indices.push(i);
            errors.push((p - plane.project(p)).norm());
        }
    }
    let summary = ErrorSummary::of(&errors).ok_or(Error::EmptyNeighborhood)?;
    Ok(DepthErrorProfile { errors, indices, summary, plane, neighborhood_radius })
}

/// Pairs each ground-truth point with its nearest scene point.
///
/// Pairs farther apart than the region radius are dropped.
pub fn pair_ground_truth(ground_truth: &[Vec3], scene: &PointCloud, region: &RegionSpec) -> Result<Vec<(Vec3, Vec3)>> {
    let pairs: Vec<(Vec3, Vec3)> = if scene.is_empty() {
        Vec::new()
    } else {
        let index = NeighborIndex::new(&scene.points);
        ground_truth.iter().filter_map(|l| index.nearest_within(l, region.radius).map(|(j, _)| (*l, scene.points[j]))).collect()
    };
    if pairs.len() < 3 {
        return Err(Error::TooFewPairs { found: pairs.len() });
    }
    Ok(pairs)
}

/// Rigid correction fitted for one region.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionModel {
    pub region: RegionSpec,
    pub transform: RigidTransform,
    /// RMS (mm) of `L − (R P + t)` over the fitted pairs.
    pub residual_rms: f64,
    pub n: usize,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    center: [f64; 3],
    radius_mm: f64,
    rotation_row_major_9: [f64; 9],
    translation_mm_3: [f64; 3],
    residual_rms_mm: f64,
    n: usize,
}

impl CorrectionModel {
    pub fn to_json(&self) -> Result<String> {
        let t = &self.transform.translation;
        let file = ModelFile {
            center: [self.region.center.x, self.region.center.y, self.region.center.z],
            radius_mm: self.region.radius,
            rotation_row_major_9: self.transform.rotation_row_major(),
            translation_mm_3: [t.x, t.y, t.z],
            residual_rms_mm: self.residual_rms,
            n: self.n,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: ModelFile = serde_json::from_str(text)?;
        if f.n < 3 {
            return Err(Error::InvalidArgument(format!("correction model fitted from {} pairs", f.n)));
        }
        Ok(Self {
            region: RegionSpec::new(Vec3::from(f.center), f.radius_mm)?,
            transform: RigidTransform::from_row_major(&f.rotation_row_major_9, &f.translation_mm_3, 1.0)?,
            residual_rms: f.residual_rms_mm,
            n: f.n,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Least-squares rigid map taking sensor points `P` onto ground truth `L`.
pub fn fit_region_correction(pairs: &[(Vec3, Vec3)], region: &RegionSpec) -> Result<CorrectionModel> {
    if pairs.len() < 3 {
        return Err(Error::DegenerateInput(format!("{} pairs, need at least 3", pairs.len())));
    }
    let sensor: Vec<Vec3> = pairs.iter().map(|(_, p)| *p).collect();
    let truth: Vec<Vec3> = pairs.iter().map(|(l, _)| *l).collect();
    let transform = kabsch_align(&sensor, &truth)?;
    let sq: f64 = pairs.iter().map(|(l, p)| (l - transform.apply(p)).norm_squared()).sum();
    Ok(CorrectionModel { region: *region, transform, residual_rms: (sq / pairs.len() as f64).sqrt(), n: pairs.len() })
}

/// Applies the model to scene points inside its region; others are unchanged.
///
/// A cloud can be corrected once; a second call returns `AlreadyCorrected`.
pub fn apply_region_correction(scene: &PointCloud, model: &CorrectionModel) -> Result<PointCloud> {
    if scene.is_corrected() {
        return Err(Error::AlreadyCorrected);
    }
    let mut out = scene.clone();
    let rotate_normals = out.normals.is_some();
    for i in 0..out.len() {
        if model.region.contains(&scene.points[i]) {
            out.points[i] = model.transform.apply(&scene.points[i]);
            if rotate_normals {
                let normals = out.normals.as_mut().expect("checked");
                normals[i] = model.transform.rotation * normals[i];
            }
        }
    }
    out.mark_corrected();
    Ok(out)
}
