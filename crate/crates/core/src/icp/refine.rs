use std::time::Instant;

use nalgebra::{Matrix3, Matrix6, Vector6};

use super::{finish, median, welsch_energy, IcpConfig, IcpResult, IcpStep, Matches, COARSE_STAGE_SLACK};
use crate::error::{Error, Result};
use crate::geometry::{orthonormalize, NeighborIndex, PointCloud, RigidTransform, Vec3};

const MAX_BACKTRACKS: usize = 10;

struct Residuals {
    /// Squared point-to-plane residual per match.
    plane2: Vec<f64>,
}

fn plane_residuals(m: &Matches, target: &[Vec3], normals: &[Vec3]) -> Residuals {
    let plane2 = (0..m.len())
        .map(|k| {
            let n = normals[m.tgt[k]];
            if n == Vec3::zeros() {
                m.dist2[k]
            } else {
                n.dot(&(m.moved[m.src[k]] - target[m.tgt[k]])).powi(2)
            }
        })
        .collect();
    Residuals { plane2 }
}

fn skew(v: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Small-angle update applied on the left of `t`, re-orthonormalized.
fn apply_increment(t: &RigidTransform, x: &Vector6<f64>) -> RigidTransform {
    let omega = Vec3::new(x[0], x[1], x[2]);
    let dt = Vec3::new(x[3], x[4], x[5]);
    let r = orthonormalize(&(Matrix3::identity() + skew(&omega)));
    RigidTransform { rotation: r * t.rotation, translation: r * t.translation + dt, scale: t.scale }
}

fn solve_step(m: &Matches, res: &Residuals, target: &[Vec3], normals: &[Vec3], nu: f64) -> Option<Vector6<f64>> {
    let mut a = Matrix6::zeros();
    let mut b = Vector6::zeros();
    for k in 0..m.len() {
        let n = normals[m.tgt[k]];
        if n == Vec3::zeros() {
            continue;
        }
        let p = m.moved[m.src[k]];
        let r = n.dot(&(p - target[m.tgt[k]]));
        let w = (-res.plane2[k] / (2.0 * nu * nu)).exp();
        let c = p.cross(&n);
        let j = Vector6::new(c.x, c.y, c.z, n.x, n.y, n.z);
        a += w * j * j.transpose();
        b -= w * r * j;
    }
    if let Some(ch) = a.cholesky() {
        return Some(ch.solve(&b));
    }
    let x = a.svd(true, true).solve(&b, 1e-12 * a.norm()).ok()?;
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Robust point-to-plane ICP with a Welsch kernel annealed from the median
/// initial residual down to `kernel_min`.
///
/// Within each kernel stage the energy never increases: a step that would
/// raise it is halved until it does not, and rejected otherwise, which ends
/// the stage.
pub fn icp_refine(source: &PointCloud, target_scene: &PointCloud, init: &RigidTransform, config: &IcpConfig) -> Result<IcpResult> {
    config.validate()?;
    source.ensure_non_empty()?;
    target_scene.ensure_non_empty()?;
    let normals =
        target_scene.normals.as_deref().ok_or_else(|| Error::InvalidArgument("point-to-plane ICP needs target normals".into()))?;
    if !init.is_valid(1e-6) {
        return Err(Error::InvalidArgument("initial transform is not a rigid motion".into()));
    }
    let start = Instant::now();
    let target = &target_scene.points;
    let index = NeighborIndex::new(target);
    let total = source.len();
    let eval = |t: &RigidTransform| {
        let m = Matches::find(&source.points, &index, t, config.max_distance);
        let r = plane_residuals(&m, target, normals);
        (m, r)
    };

    let mut transform = *init;
    let (mut matches, mut res) = eval(&transform);
    if matches.len() == 0 {
        return Err(Error::NoCorrespondencesInRange { max_distance: config.max_distance });
    }
    let nu0 = config.kernel_width.unwrap_or_else(|| median(res.plane2.iter().map(|r| r.sqrt())).unwrap_or(0.0));
    let mut nu = nu0.max(config.kernel_min);
    let mut energy = welsch_energy(res.plane2.iter().copied(), total, nu);
    if !energy.is_finite() {
        return Err(Error::NonFiniteEnergy);
    }
    let mut stage = 0;
    let mut trace = vec![IcpStep { iteration: 0, stage, nu, energy, accepted: true }];
    let mut iterations = 0;
    let mut converged = false;
    let rot_tol = config.rotation_tolerance_deg.to_radians();

    while iterations < config.max_iterations {
        iterations += 1;
        let mut stage_done = true;
        if let Some(mut x) = solve_step(&matches, &res, target, normals, nu) {
            for _ in 0..=MAX_BACKTRACKS {
                let cand = apply_increment(&transform, &x);
                let (m2, r2) = eval(&cand);
                let e2 = welsch_energy(r2.plane2.iter().copied(), total, nu);
                if !e2.is_finite() {
                    return Err(Error::NonFiniteEnergy);
                }
                let accepted = e2 <= energy && m2.len() > 0;
                trace.push(IcpStep { iteration: iterations, stage, nu, energy: e2, accepted });
                if accepted {
                    let loose = if nu > config.kernel_min { COARSE_STAGE_SLACK } else { 1.0 };
                    let small = cand.rotation_angle_to(&transform) < rot_tol * loose
                        && cand.translation_distance_to(&transform) < config.translation_tolerance_mm * loose;
                    transform = cand;
                    matches = m2;
                    res = r2;
                    energy = e2;
                    stage_done = small;
                    break;
                }
                x *= 0.5;
            }
        }
        if stage_done {
            if nu <= config.kernel_min {
                converged = true;
                break;
            }
            nu = (nu * config.anneal_factor).max(config.kernel_min);
            stage += 1;
            energy = welsch_energy(res.plane2.iter().copied(), total, nu);
            trace.push(IcpStep { iteration: iterations, stage, nu, energy, accepted: true });
        }
    }
    log::debug!("icp_refine: {iterations} iterations in {:.1} ms", start.elapsed().as_secs_f64() * 1e3);
    let result = IcpResult {
        transform,
        iterations,
        energy,
        final_nu: nu,
        inlier_rmse: None,
        inlier_fraction: 0.0,
        converged,
        budget_exceeded: false,
        success: false,
        trace,
    };
    Ok(finish(result, &matches, total, config))
}
