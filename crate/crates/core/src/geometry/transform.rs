use nalgebra::{Matrix3, Matrix4, Rotation3, Unit, UnitQuaternion};
use serde::{Deserialize, Serialize};

use super::Vec3;
use crate::error::{Error, Result};

/// Similarity transform `p ↦ scale · rotation · p + translation` (millimetres).
///
/// Rigid use keeps `scale == 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
    pub scale: f64,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vec3::zeros(), scale: 1.0 }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Self {
        Self { rotation, translation, scale: 1.0 }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self::new(Matrix3::identity(), translation)
    }

    /// Rotation of `angle` radians about `axis` followed by `translation`.
    pub fn from_axis_angle(axis: &Vec3, angle: f64, translation: Vec3) -> Self {
        let rotation = Rotation3::from_axis_angle(&Unit::new_normalize(*axis), angle);
        Self::new(*rotation.matrix(), translation)
    }

    pub fn from_quaternion(q: &UnitQuaternion<f64>, translation: Vec3) -> Self {
        Self::new(*q.to_rotation_matrix().matrix(), translation)
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    #[inline]
    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p * self.scale + self.translation
    }

    /// Inverse map: `x ↦ Rᵀ (x − t) / scale`.
    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self { rotation: rt, translation: -(rt * self.translation) / self.scale, scale: 1.0 / self.scale }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation * self.scale + self.translation,
            scale: self.scale * other.scale,
        }
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&(self.rotation * self.scale));
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn quaternion(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(self.rotation))
    }

    /// Geodesic angle (radians) between the two rotations.
    pub fn rotation_angle_to(&self, other: &RigidTransform) -> f64 {
        rotation_angle_between(&self.rotation, &other.rotation)
    }

    /// Rotation angle of this transform (radians).
    pub fn rotation_angle(&self) -> f64 {
        rotation_angle_between(&self.rotation, &Matrix3::identity())
    }

    pub fn translation_distance_to(&self, other: &RigidTransform) -> f64 {
        (self.translation - other.translation).norm()
    }

    /// Checks `RᵀR = I`, `det R = +1` (entrywise within `tol`) and `scale > 0`.
    pub fn is_valid(&self, tol: f64) -> bool {
        let gram = self.rotation.transpose() * self.rotation - Matrix3::identity();
        gram.iter().all(|v| v.abs() <= tol)
            && (self.rotation.determinant() - 1.0).abs() <= tol
            && self.scale > 0.0
            && self.translation.iter().all(|v| v.is_finite())
    }

    pub fn rotation_row_major(&self) -> [f64; 9] {
        let r = &self.rotation;
        [r[(0, 0)], r[(0, 1)], r[(0, 2)], r[(1, 0)], r[(1, 1)], r[(1, 2)], r[(2, 0)], r[(2, 1)], r[(2, 2)]]
    }

    pub fn from_row_major(rotation: &[f64; 9], translation: &[f64; 3], scale: f64) -> Result<Self> {
        let t = Self { rotation: Matrix3::from_row_slice(rotation), translation: Vec3::from_row_slice(translation), scale };
        if !t.is_valid(1e-6) {
            return Err(Error::InvalidArgument("rotation is not a proper orthonormal matrix".into()));
        }
        Ok(t)
    }
}

/// Geodesic distance on SO(3), accurate for tiny angles.
pub fn rotation_angle_between(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    // ‖A − B‖_F = 2√2 · sin(θ/2)
    let chord = (a - b).norm() / (2.0 * std::f64::consts::SQRT_2);
    2.0 * chord.min(1.0).asin()
}

/// Nearest rotation matrix in the Frobenius sense.
pub fn orthonormalize(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        let imin = argmin(&svd.singular_values.as_slice()[..3]);
        let mut u2 = u;
        u2.column_mut(imin).neg_mut();
        r = u2 * v_t;
    }
    r
}

pub(crate) fn argmin(values: &[f64]) -> usize {
    values.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap_or(0)
}

/// Rodrigues' formula for a rotation vector.
pub fn exp_so3(omega: &Vec3) -> Matrix3<f64> {
    *Rotation3::new(*omega).matrix()
}

/// Rotation vector of a rotation matrix; tolerates rounding-level departures
/// from orthonormality.
pub fn log_so3(r: &Matrix3<f64>) -> Vec3 {
    let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*r));
    let (w, v) = (q.scalar(), q.imag());
    let (w, v) = if w < 0.0 { (-w, -v) } else { (w, v) };
    let s = v.norm();
    if s < 1e-12 {
        return 2.0 * v;
    }
    v * (2.0 * s.atan2(w) / s)
}

/// JSON form shared by the CLI, tracker and correction model files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoseRecord {
    pub rotation_row_major_9: [f64; 9],
    pub translation_mm_3: [f64; 3],
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

impl From<&RigidTransform> for PoseRecord {
    fn from(t: &RigidTransform) -> Self {
        Self {
            rotation_row_major_9: t.rotation_row_major(),
            translation_mm_3: [t.translation.x, t.translation.y, t.translation.z],
            scale: t.scale,
        }
    }
}

impl TryFrom<&PoseRecord> for RigidTransform {
    type Error = Error;

    fn try_from(p: &PoseRecord) -> Result<Self> {
        RigidTransform::from_row_major(&p.rotation_row_major_9, &p.translation_mm_3, p.scale)
    }
}

impl Serialize for RigidTransform {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PoseRecord::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for RigidTransform {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rec = PoseRecord::deserialize(d)?;
        RigidTransform::try_from(&rec).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn inverse_composes_to_identity() {
        let t = RigidTransform::from_axis_angle(&Vec3::new(1.0, 2.0, 3.0), 0.7, Vec3::new(4.0, -5.0, 6.0)).with_scale(1.5);
        let id = t.compose(&t.inverse());
        assert_relative_eq!(id.rotation, Matrix3::identity(), epsilon = 1e-12);
        assert_relative_eq!(id.translation, Vec3::zeros(), epsilon = 1e-12);
        assert_relative_eq!(id.scale, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn small_angles_are_resolved() {
        let a = RigidTransform::from_axis_angle(&Vec3::z(), 1e-9, Vec3::zeros());
        assert_relative_eq!(a.rotation_angle(), 1e-9, max_relative = 1e-6);
        let b = RigidTransform::from_axis_angle(&Vec3::x(), 3.0, Vec3::zeros());
        assert_relative_eq!(b.rotation_angle(), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn log_exp_round_trip() {
        for (axis, angle) in [(Vec3::z(), 0.0), (Vec3::new(1.0, -2.0, 0.5), 1e-8), (Vec3::new(0.3, 0.1, -1.0), 2.5), (Vec3::x(), 3.1)] {
            let w = axis.normalize() * angle;
            assert_relative_eq!(log_so3(&exp_so3(&w)), w, epsilon = 1e-12);
        }
        let mut drift = Matrix3::identity();
        drift[(0, 0)] = 1.0000000000000004;
        drift[(0, 1)] = -1.4e-16;
        let w = log_so3(&drift);
        assert!(w.iter().all(|v| v.is_finite()) && w.norm() < 1e-15);
    }

    #[test]
    fn orthonormalize_repairs_drift() {
        let mut r = *Rotation3::from_euler_angles(0.3, -0.2, 1.1).matrix();
        r[(0, 1)] += 1e-4;
        let fixed = orthonormalize(&r);
        assert!(RigidTransform::new(fixed, Vec3::zeros()).is_valid(1e-12));
    }

    #[test]
    fn json_round_trip() {
        let t = RigidTransform::from_axis_angle(&Vec3::y(), 0.4, Vec3::new(1.0, 2.0, 3.0));
        let s = serde_json::to_string(&t).unwrap();
        assert!(s.contains("rotation_row_major_9"));
        let back: RigidTransform = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
    }
}
