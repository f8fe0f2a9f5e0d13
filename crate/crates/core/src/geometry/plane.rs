use nalgebra::{Matrix3, SymmetricEigen};

use super::{centroid, Vec3};
use crate::error::{Error, Result};

/// Plane `A x + B y + C z + D = 0` with `(A, B, C)` of unit length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Plane {
    /// Builds a plane through `point` with normal `normal` (normalized here).
    pub fn from_point_normal(point: &Vec3, normal: &Vec3) -> Result<Self> {
        let n = normal.try_normalize(1e-300).ok_or_else(|| Error::DegenerateInput("zero plane normal".into()))?;
        Ok(Self { a: n.x, b: n.y, c: n.z, d: -n.dot(point) })
    }

    pub fn normal(&self) -> Vec3 {
        Vec3::new(self.a, self.b, self.c)
    }

    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        (self.a * p.x + self.b * p.y + self.c * p.z + self.d) / self.normal().norm_squared()
    }

    /// Orthogonal projection of `point` onto the plane.
    pub fn project(&self, point: &Vec3) -> Vec3 {
        point - self.normal() * self.signed_distance(point)
    }
}

/// Eigen-decomposition of a symmetric 3×3 matrix with ascending eigenvalues.
pub(crate) fn sorted_eigen(m: &Matrix3<f64>) -> ([f64; 3], [Vec3; 3]) {
    let eig = SymmetricEigen::new(*m);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.map(|i| eig.eigenvalues[i]);
    let vectors = order.map(|i| eig.eigenvectors.column(i).into_owned());
    (values, vectors)
}

pub(crate) fn covariance(points: &[Vec3], center: &Vec3) -> Matrix3<f64> {
    points.iter().fold(Matrix3::zeros(), |acc, p| {
        let d = p - center;
        acc + d * d.transpose()
    })
}

/// Relative size of the middle eigenvalue below which a neighborhood is treated as collinear.
pub(crate) const RANK_TOLERANCE: f64 = 1e-12;

/// Total-least-squares plane through `points`.
pub fn fit_plane_least_squares(points: &[Vec3]) -> Result<Plane> {
    if points.len() < 3 {
        return Err(Error::DegenerateInput(format!("{} points cannot define a plane", points.len())));
    }
    let center = centroid(points).expect("non-empty");
    let cov = covariance(points, &center);
    let (values, vectors) = sorted_eigen(&cov);
    if !(values[1] > RANK_TOLERANCE * values[2].max(f64::MIN_POSITIVE)) {
        return Err(Error::DegenerateInput("points are collinear or coincident".into()));
    }
    let mut n = vectors[0].normalize();
    // canonical sign: first significant component positive
    let lead = n.iter().copied().find(|v| v.abs() > 1e-12).unwrap_or(1.0);
    if lead < 0.0 {
        n = -n;
    }
    Plane::from_point_normal(&center, &n)
}

/// Orthogonal projection of `point` onto `plane`.
pub fn project_onto_plane(point: &Vec3, plane: &Plane) -> Vec3 {
    plane.project(point)
}
