//! Procedural stand-ins for anatomical meshes.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::geometry::{bounds, PointCloud, Vec3};

/// Bounding-box diagonal (mm) every benchmark mesh is scaled to.
pub const NORMALIZED_DIAGONAL: f64 = 200.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Surrogate {
    RidgedEllipsoid,
    HelicalTube,
    BumpyTorus,
}

impl Surrogate {
    pub const ALL: [Surrogate; 3] = [Surrogate::RidgedEllipsoid, Surrogate::HelicalTube, Surrogate::BumpyTorus];

    pub fn id(&self) -> &'static str {
        match self {
            Surrogate::RidgedEllipsoid => "ridged_ellipsoid",
            Surrogate::HelicalTube => "helical_tube",
            Surrogate::BumpyTorus => "bumpy_torus",
        }
    }

    /// Roughly `n` surface samples, normalized to a 200 mm diagonal and centred.
    pub fn generate(&self, n: usize) -> PointCloud {
        let raw = match self {
            Surrogate::RidgedEllipsoid => ridged_ellipsoid(n),
            Surrogate::HelicalTube => helical_tube(n),
            Surrogate::BumpyTorus => bumpy_torus(n),
        };
        normalize_to_diagonal(&PointCloud::new(raw), NORMALIZED_DIAGONAL).with_id(self.id())
    }
}

impl fmt::Display for Surrogate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Surrogate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Surrogate::ALL.into_iter().find(|m| m.id() == s).ok_or_else(|| Error::InvalidArgument(format!("unknown surrogate mesh '{s}'")))
    }
}

/// Centres the cloud on its bounding-box centre and scales it to `diagonal`.
pub fn normalize_to_diagonal(cloud: &PointCloud, diagonal: f64) -> PointCloud {
    let Some((lo, hi)) = bounds(&cloud.points) else {
        return cloud.clone();
    };
    let center = (lo + hi) / 2.0;
    let d = (hi - lo).norm();
    let s = if d > 0.0 { diagonal / d } else { 1.0 };
    let mut out = cloud.clone();
    out.points = cloud.points.iter().map(|p| (p - center) * s).collect();
    out
}

fn fibonacci_directions(n: usize) -> impl Iterator<Item = Vec3> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n).map(move |i| {
        let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
        let r = (1.0 - z * z).sqrt();
        let phi = golden * i as f64;
        Vec3::new(r * phi.cos(), r * phi.sin(), z)
    })
}

fn bump(u: &Vec3, center: &Vec3, width2: f64) -> f64 {
    (-(u - center).norm_squared() / width2).exp()
}

fn ridged_ellipsoid(n: usize) -> Vec<Vec3> {
    let axes = Vec3::new(1.0, 0.72, 0.55);
    let c1 = Vec3::new(0.6, 0.5, 0.62).normalize();
    let c2 = Vec3::new(-0.7, 0.1, -0.7).normalize();
    fibonacci_directions(n)
        .map(|u| {
            let theta = u.z.clamp(-1.0, 1.0).acos();
            let phi = u.y.atan2(u.x);
            let m = 1.0 + 0.06 * (5.0 * phi + 2.0 * theta).sin() * theta.sin() + 0.12 * u.x - 0.08 * u.y
                + 0.06 * u.z
                + 0.025 * (11.0 * theta).sin()
                + 0.15 * bump(&u, &c1, 0.1)
                - 0.08 * bump(&u, &c2, 0.05);
            u.component_mul(&axes) * m
        })
        .collect()
}

fn helical_tube(n: usize) -> Vec<Vec3> {
    let turns = 2.5 * PI;
    let along = ((n as f64) * 4.0).sqrt().ceil() as usize;
    let around = (n / along).max(8);
    let center = |t: f64| {
        let r = 1.0 + 0.15 * t;
        Vec3::new(r * t.cos(), r * t.sin(), 0.25 * t)
    };
    let mut pts = Vec::with_capacity(along * around);
    for i in 0..along {
        let t = turns * (i as f64 + 0.5) / along as f64;
        let c = center(t);
        let tangent = (center(t + 1e-4) - center(t - 1e-4)).normalize();
        let e1 = tangent.cross(&Vec3::z()).normalize();
        let e2 = tangent.cross(&e1);
        let radius = 0.2 + 0.04 * t;
        for j in 0..around {
            // staggered rings avoid a visible seam
            let s = 2.0 * PI * (j as f64 + 0.5 * (i % 2) as f64) / around as f64;
            let rho = radius * (1.0 + 0.12 * (4.0 * s + 0.7 * t).sin());
            pts.push(c + (e1 * s.cos() + e2 * s.sin()) * rho);
        }
    }
    pts
}

fn bumpy_torus(n: usize) -> Vec<Vec3> {
    let major = 1.0;
    let along = ((n as f64) * 2.5).sqrt().ceil() as usize;
    let around = (n / along).max(8);
    let mut pts = Vec::with_capacity(along * around);
    for i in 0..along {
        let u = 2.0 * PI * i as f64 / along as f64;
        for j in 0..around {
            let v = 2.0 * PI * (j as f64 + 0.5 * (i % 2) as f64) / around as f64;
            let lump = (-((u - 1.0).powi(2) + (v - 2.0).powi(2)) / 0.15).exp();
            let r = 0.35 * (1.0 + 0.2 * u.cos() + 0.12 * (3.0 * u + v).sin() * (2.0 * v).cos() + 0.35 * lump);
            let ring = major * (1.0 + 0.12 * (u + 0.5).sin());
            pts.push(Vec3::new((ring + r * v.cos()) * u.cos(), (ring + r * v.cos()) * u.sin(), r * v.sin()));
        }
    }
    pts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{kabsch_align, NeighborIndex, RigidTransform};

    #[test]
    fn normalized_and_named() {
        for m in Surrogate::ALL {
            let c = m.generate(20_000);
            assert!(c.len() >= 15_000, "{m}: {}", c.len());
            let (lo, hi) = c.bounds().unwrap();
            assert!(((hi - lo).norm() - NORMALIZED_DIAGONAL).abs() < 1e-9);
            assert!(((hi + lo) / 2.0).norm() < 1e-9);
            assert_eq!(c.id, m.id());
            assert_eq!(m.id().parse::<Surrogate>().unwrap(), m);
        }
    }

    /// Half and third turns about the coordinate axes are the self-maps of
    /// the underlying ellipsoid, tube and torus; after ICP settles from each,
    /// the fit must be clearly worse than the identity.
    #[test]
    fn shapes_have_no_rigid_self_symmetry() {
        for m in Surrogate::ALL {
            let c = m.generate(6000);
            let index = NeighborIndex::new(&c.points);
            let center = c.centroid().unwrap();
            let fit = |t: &RigidTransform| {
                let s: f64 = c.points.iter().step_by(7).map(|p| index.nearest(&t.apply(p)).unwrap().1).sum();
                (s / (c.len() / 7) as f64).sqrt()
            };
            for axis in [Vec3::x(), Vec3::y(), Vec3::z()] {
                for angle in [PI / 2.0, 2.0 * PI / 3.0, PI, 4.0 * PI / 3.0] {
                    let r = RigidTransform::from_axis_angle(&axis, angle, Vec3::zeros());
                    // rotate about the centroid
                    let t = RigidTransform::new(r.rotation, center - r.rotation * center);
                    // let point-to-point ICP settle the pose before measuring
                    let mut pose = t;
                    for _ in 0..100 {
                        let src: Vec<Vec3> = c.points.iter().step_by(7).copied().collect();
                        let dst: Vec<Vec3> = src.iter().map(|p| c.points[index.nearest(&pose.apply(p)).unwrap().0]).collect();
                        pose = kabsch_align(&src, &dst).unwrap();
                    }
                    assert!(
                        pose.rotation_angle() < 20f64.to_radians() || fit(&pose) > 2.0,
                        "{m} looks symmetric about {axis:?} at {angle}: {} {}",
                        fit(&pose),
                        pose.rotation_angle()
                    );
                }
            }
        }
    }
}
