use std::collections::VecDeque;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, Vector6};

use super::{finish, median, welsch_energy, IcpConfig, IcpResult, IcpStep, Matches, COARSE_STAGE_SLACK};
use crate::error::{Error, Result};
use crate::geometry::{exp_so3, kabsch_weighted, log_so3, NeighborIndex, PointCloud, RigidTransform, Vec3};

fn to_vec(t: &RigidTransform) -> Vector6<f64> {
    let w = log_so3(&t.rotation);
    Vector6::new(w.x, w.y, w.z, t.translation.x, t.translation.y, t.translation.z)
}

fn from_vec(x: &Vector6<f64>) -> RigidTransform {
    RigidTransform::new(exp_so3(&Vec3::new(x[0], x[1], x[2])), Vec3::new(x[3], x[4], x[5]))
}

/// Anderson acceleration over the fixed-point map `x ↦ G(x)`.
struct Anderson {
    depth: usize,
    g: VecDeque<Vector6<f64>>,
    f: VecDeque<Vector6<f64>>,
}

impl Anderson {
    fn new(depth: usize) -> Self {
        Self { depth, g: VecDeque::new(), f: VecDeque::new() }
    }

    fn reset(&mut self) {
        self.g.clear();
        self.f.clear();
    }

    /// Records `g = G(x)` and returns the extrapolated next iterate.
    fn step(&mut self, x: &Vector6<f64>, g: &Vector6<f64>) -> Vector6<f64> {
        self.g.push_back(*g);
        self.f.push_back(g - x);
        if self.g.len() > self.depth + 1 {
            self.g.pop_front();
            self.f.pop_front();
        }
        let m = self.g.len() - 1;
        if m == 0 {
            return *g;
        }
        let df = DMatrix::from_fn(6, m, |r, c| self.f[c + 1][r] - self.f[c][r]);
        let fk = DVector::from_column_slice(self.f[m].as_slice());
        let Ok(theta) = df.clone().svd(true, true).solve(&fk, 1e-10 * df.norm().max(1e-300)) else {
            return *g;
        };
        let mut acc = *g;
        for c in 0..m {
            acc -= (self.g[c + 1] - self.g[c]) * theta[c];
        }
        if acc.iter().all(|v| v.is_finite()) {
            acc
        } else {
            *g
        }
    }
}

/// Point-to-point ICP with Welsch-weighted Kabsch steps and Anderson
/// acceleration; an accelerated iterate is kept only when it does not raise
/// the energy.
///
/// Stops early with `budget_exceeded` once the wall-clock budget is spent.
pub fn icp_fast(source: &PointCloud, target_scene: &PointCloud, init: &RigidTransform, config: &IcpConfig) -> Result<IcpResult> {
    config.validate()?;
    source.ensure_non_empty()?;
    target_scene.ensure_non_empty()?;
    if !init.is_valid(1e-6) {
        return Err(Error::InvalidArgument("initial transform is not a rigid motion".into()));
    }
    let start = Instant::now();
    let index = NeighborIndex::new(&target_scene.points);
    fit_prepared(&source.points, &target_scene.points, &index, init, config, start)
}

pub(crate) fn fit_prepared(
    source: &[Vec3],
    target: &[Vec3],
    index: &NeighborIndex,
    init: &RigidTransform,
    config: &IcpConfig,
    start: Instant,
) -> Result<IcpResult> {
    let total = source.len();
    let eval = |x: &Vector6<f64>| Matches::find(source, index, &from_vec(x), config.max_distance);
    let mut x = to_vec(init);
    let mut matches = eval(&x);
    if matches.len() == 0 {
        return Err(Error::NoCorrespondencesInRange { max_distance: config.max_distance });
    }
    let nu0 = config.kernel_width.unwrap_or_else(|| 3.0 * median(matches.dist2.iter().map(|d| d.sqrt())).unwrap_or(0.0));
    let mut nu = nu0.max(config.kernel_min);
    let mut energy = welsch_energy(matches.dist2.iter().copied(), total, nu);
    if !energy.is_finite() {
        return Err(Error::NonFiniteEnergy);
    }
    let mut stage = 0;
    let mut trace = vec![IcpStep { iteration: 0, stage, nu, energy, accepted: true }];
    let mut anderson = Anderson::new(config.anderson_depth);
    let (mut iterations, mut converged, mut budget_exceeded) = (0, false, false);
    let rot_tol = config.rotation_tolerance_deg.to_radians();
    let over_budget = || config.budget_ms.is_some_and(|b| start.elapsed().as_secs_f64() * 1e3 > b);

    while iterations < config.max_iterations {
        if over_budget() {
            budget_exceeded = true;
            break;
        }
        iterations += 1;
        let src: Vec<Vec3> = matches.src.iter().map(|&i| source[i]).collect();
        let tgt: Vec<Vec3> = matches.tgt.iter().map(|&j| target[j]).collect();
        let w: Vec<f64> = matches.dist2.iter().map(|d2| (-d2 / (2.0 * nu * nu)).exp()).collect();
        let Ok(g_t) = kabsch_weighted(&src, &tgt, Some(&w)) else {
            break;
        };
        let g = to_vec(&g_t);
        let mut next = anderson.step(&x, &g);
        let mut next_matches = eval(&next);
        let mut next_energy = welsch_energy(next_matches.dist2.iter().copied(), total, nu);
        let accelerated = next != g;
        if accelerated && !(next_energy <= energy && next_matches.len() > 0) {
            trace.push(IcpStep { iteration: iterations, stage, nu, energy: next_energy, accepted: false });
            anderson.reset();
            next = g;
            next_matches = eval(&next);
            next_energy = welsch_energy(next_matches.dist2.iter().copied(), total, nu);
        }
        if next_matches.len() == 0 {
            break;
        }
        if !next_energy.is_finite() {
            return Err(Error::NonFiniteEnergy);
        }
        trace.push(IcpStep { iteration: iterations, stage, nu, energy: next_energy, accepted: true });
        let (prev, cur) = (from_vec(&x), from_vec(&next));
        let loose = if nu > config.kernel_min { COARSE_STAGE_SLACK } else { 1.0 };
        let small =
            cur.rotation_angle_to(&prev) < rot_tol * loose && cur.translation_distance_to(&prev) < config.translation_tolerance_mm * loose;
        x = next;
        matches = next_matches;
        energy = next_energy;
        if small {
            if nu <= config.kernel_min {
                converged = true;
                break;
            }
            nu = (nu * config.anneal_factor).max(config.kernel_min);
            stage += 1;
            anderson.reset();
            energy = welsch_energy(matches.dist2.iter().copied(), total, nu);
            trace.push(IcpStep { iteration: iterations, stage, nu, energy, accepted: true });
        }
    }
    if budget_exceeded {
        log::warn!("icp_fast stopped at the time budget after {iterations} iterations");
    }
    let result = IcpResult {
        transform: from_vec(&x),
        iterations,
        energy,
        final_nu: nu,
        inlier_rmse: None,
        inlier_fraction: 0.0,
        converged,
        budget_exceeded,
        success: false,
        trace,
    };
    Ok(finish(result, &matches, total, config))
}
