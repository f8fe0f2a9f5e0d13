use nalgebra::Matrix3;

use super::{CoarseConfig, TimSet};
use crate::error::{Error, Result};
use crate::geometry::rotation_from_covariance;

/// Consecutive strictly increasing objective values treated as divergence.
const DIVERGENCE_RUN: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct RotationEstimate {
    pub rotation: Matrix3<f64>,
    /// TIM edges with normalized residual inside the truncation bound.
    pub inliers: Vec<usize>,
    /// Truncated objective at `rotation`.
    pub objective: f64,
    pub iterations: usize,
    /// Objective kept rising; `rotation` is the best iterate seen.
    pub diverged: bool,
}

fn normalized_residuals(tims: &TimSet, kappa: f64, r: &Matrix3<f64>) -> Vec<f64> {
    (0..tims.len())
        .map(|e| {
            let d = tims.delta_q[e] / kappa - r * tims.delta_p[e];
            d.norm_squared() / tims.rotation_bounds[e].powi(2)
        })
        .collect()
}

fn tls_cost(tims: &TimSet, res: &[f64], c2: f64) -> f64 {
    res.iter().zip(&tims.weights).map(|(r, w)| w * r.min(c2)).sum()
}

fn weighted_rotation(tims: &TimSet, kappa: f64, gnc_weights: &[f64]) -> Result<Matrix3<f64>> {
    let mut h = Matrix3::zeros();
    for e in 0..tims.len() {
        let w = gnc_weights[e] * tims.weights[e] / tims.rotation_bounds[e].powi(2);
        if w > 0.0 {
            h += tims.delta_p[e] * (tims.delta_q[e] / kappa).transpose() * w;
        }
    }
    rotation_from_covariance(&h)
}

/// Rotation from TIMs by graduated non-convexity on the truncated cost.
///
/// The control parameter starts where the surrogate is convex over all
/// residuals and shrinks by `gnc_factor` per outer iteration until the
/// weights are binary.
pub fn estimate_rotation_gnc(tims: &TimSet, kappa: f64, config: &CoarseConfig) -> Result<RotationEstimate> {
    if tims.len() < 3 {
        return Err(Error::TooFewCorrespondences { found: tims.len(), required: 3 });
    }
    if !(kappa > 0.0) {
        return Err(Error::InvalidArgument(format!("scale must be positive, got {kappa}")));
    }
    let c2 = config.c2;
    let mut weights = vec![1.0; tims.len()];
    let mut rotation = weighted_rotation(tims, kappa, &weights)?;
    let mut res = normalized_residuals(tims, kappa, &rotation);
    let mut cost = tls_cost(tims, &res, c2);
    let finish = |rotation: Matrix3<f64>, res: &[f64], objective: f64, iterations: usize, diverged: bool| RotationEstimate {
        rotation,
        inliers: (0..res.len()).filter(|&e| res[e] <= c2).collect(),
        objective,
        iterations,
        diverged,
    };
    let r_max = res.iter().cloned().fold(0.0, f64::max);
    if r_max <= c2 {
        return Ok(finish(rotation, &res, cost, 0, false));
    }

    let mut relax = 2.0 * r_max / c2 - 1.0;
    let mut best = (cost, rotation, res.clone());
    let mut rising = 0;
    let mut iterations = 0;
    while iterations < config.gnc_max_iterations {
        iterations += 1;
        let mu = 1.0 / relax;
        let (lo, hi) = (mu / (mu + 1.0) * c2, (mu + 1.0) / mu * c2);
        for (w, &r) in weights.iter_mut().zip(&res) {
            *w = if r >= hi {
                0.0
            } else if r <= lo {
                1.0
            } else {
                (c2 * mu * (mu + 1.0) / r).sqrt() - mu
            };
        }
        let Ok(next) = weighted_rotation(tims, kappa, &weights) else {
            break;
        };
        rotation = next;
        res = normalized_residuals(tims, kappa, &rotation);
        let next_cost = tls_cost(tims, &res, c2);
        rising = if next_cost > cost { rising + 1 } else { 0 };
        let stable = (next_cost - cost).abs() <= config.gnc_cost_tolerance * cost.abs().max(1e-12);
        cost = next_cost;
        if cost < best.0 {
            best = (cost, rotation, res.clone());
        }
        if rising >= DIVERGENCE_RUN {
            log::warn!("GNC rotation diverged after {iterations} iterations");
            return Ok(finish(best.1, &best.2, best.0, iterations, true));
        }
        let binary = weights.iter().all(|&w| w == 0.0 || w == 1.0);
        if binary && stable {
            break;
        }
        relax /= config.gnc_factor;
    }
    let (objective, rotation, res) = if cost <= best.0 { (cost, rotation, res) } else { best };
    Ok(finish(rotation, &res, objective, iterations, false))
}

#[cfg(test)]
mod tests {
    use super::super::build_tims;
    use super::*;
    use crate::features::CorrespondenceSet;
    use crate::geometry::{kabsch_weighted, rotation_angle_between, PointCloud, RigidTransform, Vec3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(n: usize, rng: &mut ChaCha8Rng) -> PointCloud {
        PointCloud::new(
            (0..n)
                .map(|_| Vec3::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0)))
                .collect(),
        )
    }

    fn tims_from_edges(dp: Vec<Vec3>, dq: Vec<Vec3>, bound: f64) -> TimSet {
        let n = dp.len();
        TimSet {
            edges: (0..n).map(|i| (i, i + 1)).collect(),
            scale_bounds: dp.iter().map(|d| bound / d.norm()).collect(),
            delta_p: dp,
            delta_q: dq,
            weights: vec![1.0; n],
            rotation_bounds: vec![bound; n],
        }
    }

    #[test]
    fn outlier_free_equals_weighted_kabsch() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let src = cloud(25, &mut rng);
        let g = RigidTransform::from_axis_angle(&Vec3::new(1.0, 2.0, 3.0).normalize(), 0.8, Vec3::new(5.0, 1.0, 0.0));
        let tgt = src.transformed(&g);
        let cfg = CoarseConfig::default();
        let tims = build_tims(&CorrespondenceSet::from_pairs((0..25).map(|i| (i, i)).collect()), &src, &tgt, &cfg).unwrap();
        let est = estimate_rotation_gnc(&tims, 1.0, &cfg).unwrap();
        // mirrored edge vectors have zero mean, so Kabsch sees the same cross-covariance
        let mut p: Vec<Vec3> = tims.delta_p.clone();
        let mut q: Vec<Vec3> = tims.delta_q.clone();
        p.extend(tims.delta_p.iter().map(|d| -d));
        q.extend(tims.delta_q.iter().map(|d| -d));
        let k = kabsch_weighted(&p, &q, None).unwrap();
        assert!(rotation_angle_between(&est.rotation, &k.rotation) < 1e-8);
        assert!(rotation_angle_between(&est.rotation, &g.rotation) < 1e-8);
        assert_eq!(est.iterations, 0);
    }

    #[test]
    fn identical_clouds_give_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let src = cloud(10, &mut rng);
        let cfg = CoarseConfig::default();
        let tims = build_tims(&CorrespondenceSet::from_pairs((0..10).map(|i| (i, i)).collect()), &src, &src, &cfg).unwrap();
        let est = estimate_rotation_gnc(&tims, 1.0, &cfg).unwrap();
        assert!(rotation_angle_between(&est.rotation, &Matrix3::identity()) < 1e-8);
    }

    fn random_rotation(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
        let axis = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)).normalize();
        RigidTransform::from_axis_angle(&axis, rng.random_range(0.0..std::f64::consts::PI), Vec3::zeros()).rotation
    }

    /// Exhaustive minimal-sample oracle: every pair of non-parallel edges fixes a rotation;
    /// keep the one with the largest inlier count.
    fn exhaustive_oracle(tims: &TimSet, c2: f64) -> Matrix3<f64> {
        let mut best = (0usize, Matrix3::identity());
        for a in 0..tims.len() {
            for b in a + 1..tims.len() {
                let (pa, pb) = (tims.delta_p[a], tims.delta_p[b]);
                let (qa, qb) = (tims.delta_q[a], tims.delta_q[b]);
                if pa.cross(&pb).norm() < 1e-3 * pa.norm() * pb.norm() || qa.cross(&qb).norm() < 1e-3 * qa.norm() * qb.norm() {
                    continue;
                }
                let frame = |x: Vec3, y: Vec3| {
                    let e1 = x.normalize();
                    let e3 = x.cross(&y).normalize();
                    Matrix3::from_columns(&[e1, e3.cross(&e1), e3])
                };
                let r = frame(qa, qb) * frame(pa, pb).transpose();
                let count = (0..tims.len())
                    .filter(|&e| (tims.delta_q[e] - r * tims.delta_p[e]).norm_squared() / tims.rotation_bounds[e].powi(2) <= c2)
                    .count();
                if count > best.0 {
                    best = (count, r);
                }
            }
        }
        best.1
    }

    #[test]
    fn recovers_rotation_with_forty_percent_outlier_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let truth = RigidTransform::from_axis_angle(&Vec3::z(), 40f64.to_radians(), Vec3::zeros()).rotation;
        let n = 60;
        let mut dp = Vec::new();
        let mut dq = Vec::new();
        for i in 0..n {
            let p = Vec3::new(rng.random_range(-60.0..60.0), rng.random_range(-60.0..60.0), rng.random_range(-60.0..60.0));
            dp.push(p);
            if i < 36 {
                let noise = Vec3::new(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2));
                dq.push(truth * p + noise);
            } else {
                dq.push(random_rotation(&mut rng) * p * rng.random_range(0.5..1.5));
            }
        }
        let tims = tims_from_edges(dp, dq, 2.0);
        let est = estimate_rotation_gnc(&tims, 1.0, &CoarseConfig::default()).unwrap();
        let oracle = exhaustive_oracle(&tims, 1.0);
        assert!(rotation_angle_between(&oracle, &truth).to_degrees() < 0.5);
        assert!(rotation_angle_between(&est.rotation, &truth).to_degrees() < 0.5);
        assert!(!est.diverged);
        assert!((0..36).all(|e| est.inliers.contains(&e)));
    }

    #[test]
    fn result_is_a_rotation_for_random_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let n = rng.random_range(3..40);
            let dp: Vec<Vec3> =
                (0..n).map(|_| Vec3::new(rng.random_range(-9.0..9.0), rng.random_range(-9.0..9.0), rng.random_range(-9.0..9.0))).collect();
            let dq: Vec<Vec3> =
                (0..n).map(|_| Vec3::new(rng.random_range(-9.0..9.0), rng.random_range(-9.0..9.0), rng.random_range(-9.0..9.0))).collect();
            if let Ok(est) = estimate_rotation_gnc(&tims_from_edges(dp, dq, 1.0), 1.0, &CoarseConfig::default()) {
                let r = est.rotation;
                assert!((r.transpose() * r - Matrix3::identity()).abs().max() < 1e-9);
                assert!((r.determinant() - 1.0).abs() < 1e-9);
            }
        }
    }
}
