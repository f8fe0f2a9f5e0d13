//! Outlier-robust global registration from weighted correspondences.
//!
//! Pairwise differences of correspondences (TIMs) cancel translation, so
//! scale and rotation are solved first, then translation component-wise.
//! Every stage minimizes a truncated least-squares objective.

mod clique;
mod gnc;
mod pipeline;
mod tims;
mod voting;

use serde::{Deserialize, Serialize};

pub use clique::{max_clique, prune_max_clique, CliquePruning};
pub use gnc::{estimate_rotation_gnc, RotationEstimate};
pub use pipeline::{coarse_register, register_correspondences, CoarseDiagnostics, CoarseResult, StageDiagnostic};
pub use tims::{build_tims, TimSet, MIN_EDGE_LENGTH};
pub use voting::{solve_tls_1d, tls_objective, weighted_median, Measurement, TlsSolution};

use crate::error::{Error, Result};
use crate::features::CorrespondenceSet;
use crate::geometry::{PointCloud, Vec3};
use nalgebra::Matrix3;

/// When to run maximum-clique pruning before rotation estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CliqueMode {
    /// Prune when there are more than [`CLIQUE_AUTO_THRESHOLD`] correspondences.
    Auto,
    On,
    Off,
}

pub const CLIQUE_AUTO_THRESHOLD: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoarseConfig {
    /// Truncation bound ε on a single point's residual (mm). Edge bounds are twice this.
    pub noise_bound: f64,
    /// Normalization c² of the truncated cost.
    pub c2: f64,
    /// Fixed scale; `None` estimates κ by voting.
    pub known_scale: Option<f64>,
    /// Division factor of the GNC control parameter per outer iteration.
    pub gnc_factor: f64,
    pub gnc_max_iterations: usize,
    /// Relative cost change treated as stable.
    pub gnc_cost_tolerance: f64,
    /// Cap on correspondences entering the complete TIM graph.
    pub max_correspondences: usize,
    pub clique: CliqueMode,
    /// Branch-and-bound node budget for the exact clique search.
    pub clique_node_budget: usize,
    /// Estimate translation from the rotation/clique inliers only (when at least 3).
    pub translation_from_inliers: bool,
    /// Seed for correspondence subsampling; `coarse_register` overwrites it.
    pub sampling_seed: u64,
    /// Neighbors for normal and curvature estimation.
    pub normal_k: usize,
    /// Curvature-weighted source samples.
    pub source_samples: usize,
    /// Target samples; `None` describes every target point.
    pub target_samples: Option<usize>,
    /// FPFH support radius (mm).
    pub feature_radius: f64,
    /// Matching threshold as a multiple of the median source-to-target descriptor NN distance.
    pub tau_factor: f64,
    pub mutual_matching: bool,
}

impl Default for CoarseConfig {
    fn default() -> Self {
        Self {
            noise_bound: 1.0,
            c2: 1.0,
            known_scale: Some(1.0),
            gnc_factor: 1.4,
            gnc_max_iterations: 64,
            gnc_cost_tolerance: 1e-6,
            max_correspondences: 300,
            clique: CliqueMode::Auto,
            clique_node_budget: 200_000,
            translation_from_inliers: true,
            sampling_seed: 0,
            normal_k: 24,
            source_samples: 300,
            target_samples: None,
            feature_radius: 25.0,
            tau_factor: 0.9,
            mutual_matching: true,
        }
    }
}

impl CoarseConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("noise_bound", self.noise_bound),
            ("c2", self.c2),
            ("gnc_factor", self.gnc_factor - 1.0),
            ("feature_radius", self.feature_radius),
            ("tau_factor", self.tau_factor),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} out of range")));
            }
        }
        if let Some(k) = self.known_scale {
            if !(k > 0.0 && k.is_finite()) {
                return Err(Error::InvalidArgument(format!("known_scale must be positive, got {k}")));
            }
        }
        if self.max_correspondences < 3 || self.gnc_max_iterations == 0 || self.source_samples == 0 || self.normal_k < 3 {
            return Err(Error::InvalidArgument("counts in coarse config too small".into()));
        }
        Ok(())
    }

    pub(crate) fn use_clique(&self, correspondences: usize) -> bool {
        match self.clique {
            CliqueMode::On => true,
            CliqueMode::Off => false,
            CliqueMode::Auto => correspondences > CLIQUE_AUTO_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleEstimate {
    pub scale: f64,
    /// TIM edges whose scale interval contains the estimate.
    pub inliers: Vec<usize>,
    pub objective: f64,
    /// No two scale intervals overlapped; `scale` is the weighted median.
    pub no_consensus: bool,
}

/// Global scale by exact TLS voting over the ratios `|Δq| / |Δp|`.
///
/// Returns `known_scale` untouched when the config pins it.
pub fn estimate_scale_tls(tims: &TimSet, config: &CoarseConfig) -> Result<ScaleEstimate> {
    if let Some(k) = config.known_scale {
        return Ok(ScaleEstimate { scale: k, inliers: (0..tims.len()).collect(), objective: 0.0, no_consensus: false });
    }
    if tims.is_empty() {
        return Err(Error::TooFewCorrespondences { found: 0, required: 1 });
    }
    let measurements: Vec<Measurement> = (0..tims.len())
        .map(|e| Measurement {
            value: tims.delta_q[e].norm() / tims.delta_p[e].norm(),
            bound: tims.scale_bounds[e],
            weight: tims.weights[e],
        })
        .collect();
    let sol = solve_tls_1d(&measurements, config.c2);
    if sol.no_consensus {
        log::warn!("scale voting found no consensus; using weighted median");
    }
    Ok(ScaleEstimate { scale: sol.estimate, inliers: sol.consensus, objective: sol.objective, no_consensus: sol.no_consensus })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranslationEstimate {
    pub translation: Vec3,
    /// Correspondences inside the truncation bound on all three axes.
    pub inliers: Vec<usize>,
    pub objective: [f64; 3],
    pub no_consensus: [bool; 3],
}

/// Translation by three independent TLS votes over `q − κ R p`.
pub fn estimate_translation_tls(
    corr: &CorrespondenceSet,
    source: &PointCloud,
    target: &PointCloud,
    kappa: f64,
    rotation: &Matrix3<f64>,
    config: &CoarseConfig,
) -> Result<TranslationEstimate> {
    if corr.is_empty() {
        return Err(Error::NoCorrespondences);
    }
    let residuals: Vec<Vec3> = corr.pairs.iter().map(|&(s, t)| target.points[t] - kappa * (rotation * source.points[s])).collect();
    let mut translation = Vec3::zeros();
    let mut objective = [0.0; 3];
    let mut no_consensus = [false; 3];
    let mut votes = vec![0u8; corr.len()];
    for axis in 0..3 {
        let measurements: Vec<Measurement> = residuals
            .iter()
            .zip(&corr.weights)
            .map(|(r, &w)| Measurement { value: r[axis], bound: config.noise_bound, weight: w })
            .collect();
        let sol = solve_tls_1d(&measurements, config.c2);
        if sol.no_consensus {
            log::warn!("translation voting on axis {axis} found no consensus; using weighted median");
        }
        translation[axis] = sol.estimate;
        objective[axis] = sol.objective;
        no_consensus[axis] = sol.no_consensus;
        for i in sol.consensus {
            votes[i] += 1;
        }
    }
    let inliers = (0..corr.len()).filter(|&i| votes[i] == 3).collect();
    Ok(TranslationEstimate { translation, inliers, objective, no_consensus })
}
