use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::RigidTransform;

pub type Vec3 = Vector3<f64>;

/// A set of 3-D points in millimetres with optional per-point normals and curvatures.
///
/// A normal equal to the zero vector marks a point whose neighborhood was
/// degenerate; use [`PointCloud::normal`] to read it as an `Option`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub id: String,
    pub points: Vec<Vec3>,
    pub normals: Option<Vec<Vec3>>,
    pub curvatures: Option<Vec<f64>>,
    corrected: bool,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        Self { points, ..Default::default() }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn with_normals(mut self, normals: Vec<Vec3>) -> Self {
        debug_assert_eq!(normals.len(), self.points.len());
        self.normals = Some(normals);
        self
    }

    pub fn with_curvatures(mut self, curvatures: Vec<f64>) -> Self {
        debug_assert_eq!(curvatures.len(), self.points.len());
        self.curvatures = Some(curvatures);
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn ensure_non_empty(&self) -> Result<()> {
        if self.points.is_empty() {
            Err(Error::EmptyCloud)
        } else {
            Ok(())
        }
    }

    /// Normal of point `i`, `None` when normals are absent or undefined at `i`.
    pub fn normal(&self, i: usize) -> Option<Vec3> {
        let n = self.normals.as_ref()?[i];
        if n == Vec3::zeros() {
            None
        } else {
            Some(n)
        }
    }

    /// True once a region correction has been applied.
    pub fn is_corrected(&self) -> bool {
        self.corrected
    }

    pub(crate) fn mark_corrected(&mut self) {
        self.corrected = true;
    }

    /// Keeps the points at `indices`, carrying normals and curvatures along.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            id: self.id.clone(),
            points: indices.iter().map(|&i| self.points[i]).collect(),
            normals: self.normals.as_ref().map(|n| indices.iter().map(|&i| n[i]).collect()),
            curvatures: self.curvatures.as_ref().map(|c| indices.iter().map(|&i| c[i]).collect()),
            corrected: self.corrected,
        }
    }

    pub fn centroid(&self) -> Option<Vec3> {
        centroid(&self.points)
    }

    /// Axis-aligned bounds `(min, max)`.
    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        bounds(&self.points)
    }

    /// Checks the unit-normal and curvature invariants.
    pub fn validate(&self) -> Result<()> {
        if let Some(normals) = &self.normals {
            if normals.len() != self.points.len() {
                return Err(Error::InvalidArgument("normals length mismatch".into()));
            }
            for n in normals {
                let norm = n.norm();
                if norm != 0.0 && (norm - 1.0).abs() > 1e-6 {
                    return Err(Error::InvalidArgument(format!("normal of length {norm}")));
                }
            }
        }
        if let Some(curv) = &self.curvatures {
            if curv.len() != self.points.len() {
                return Err(Error::InvalidArgument("curvatures length mismatch".into()));
            }
            if curv.iter().any(|&c| !(c >= 0.0)) {
                return Err(Error::InvalidArgument("negative curvature".into()));
            }
        }
        Ok(())
    }

    /// Maps points by `transform`; normals are rotated only, curvatures kept.
    pub fn transformed(&self, transform: &RigidTransform) -> PointCloud {
        let mut out = self.clone();
        for p in &mut out.points {
            *p = transform.apply(p);
        }
        if let Some(normals) = &mut out.normals {
            for n in normals.iter_mut() {
                if *n != Vec3::zeros() {
                    *n = transform.rotation * *n;
                }
            }
        }
        out
    }
}

pub fn centroid(points: &[Vec3]) -> Option<Vec3> {
    if points.is_empty() {
        return None;
    }
    let sum = points.iter().fold(Vec3::zeros(), |acc, p| acc + p);
    Some(sum / points.len() as f64)
}

pub fn bounds(points: &[Vec3]) -> Option<(Vec3, Vec3)> {
    let first = *points.first()?;
    Some(points.iter().fold((first, first), |(lo, hi), p| (lo.inf(p), hi.sup(p))))
}

/// Applies `transform` to every point of `cloud`.
pub fn apply_transform(cloud: &PointCloud, transform: &RigidTransform) -> PointCloud {
    cloud.transformed(transform)
}
