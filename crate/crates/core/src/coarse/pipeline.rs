use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{build_tims, estimate_rotation_gnc, estimate_scale_tls, estimate_translation_tls, prune_max_clique, CoarseConfig, TimSet};
use crate::error::{Error, Result};
use crate::features::{compute_fpfh, curvature_weighted_sample, default_tau, match_descriptors, CorrespondenceSet, MatchOptions};
use crate::geometry::{estimate_normals_and_curvature, NormalOrientation, PointCloud, RigidTransform};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageDiagnostic {
    pub stage: String,
    pub input_count: usize,
    pub inlier_count: usize,
    /// Median residual (mm) over the stage's inliers.
    pub residual_median: Option<f64>,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CoarseDiagnostics {
    pub stages: Vec<StageDiagnostic>,
    pub noise_bound: f64,
    pub scale_no_consensus: bool,
    pub clique_singleton: bool,
    pub clique_exact: Option<bool>,
    pub rotation_diverged: bool,
    pub translation_no_consensus: [bool; 3],
}

impl CoarseDiagnostics {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn push(&mut self, stage: &str, input_count: usize, inlier_count: usize, residuals: Vec<f64>, start: Instant) {
        self.stages.push(StageDiagnostic {
            stage: stage.to_string(),
            input_count,
            inlier_count,
            residual_median: median(residuals),
            wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        });
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoarseResult {
    pub transform: RigidTransform,
    /// Correspondences the estimate was computed from.
    pub correspondences: CorrespondenceSet,
    /// TIM edges (correspondence index pairs) surviving rotation TLS.
    pub inlier_edges: Vec<(usize, usize)>,
    /// Indices into `correspondences` inside the translation bound.
    pub inlier_pairs: Vec<usize>,
    pub diagnostics: CoarseDiagnostics,
}

fn registration_error(e: Error) -> Error {
    match e {
        Error::NoCorrespondences | Error::TooFewCorrespondences { .. } => Error::RegistrationFailed(e.to_string()),
        other => other,
    }
}

/// Robust registration from given correspondences: TIMs, optional clique
/// pruning, scale, rotation, translation.
pub fn register_correspondences(
    corr: &CorrespondenceSet,
    source: &PointCloud,
    target: &PointCloud,
    config: &CoarseConfig,
) -> Result<CoarseResult> {
    config.validate()?;
    let mut diag = CoarseDiagnostics { noise_bound: config.noise_bound, ..Default::default() };

    let start = Instant::now();
    let tims = build_tims(corr, source, target, config).map_err(registration_error)?;
    if tims.len() < 3 {
        return Err(Error::RegistrationFailed(format!("only {} usable measurement pairs", tims.len())));
    }
    diag.push("tims", corr.len(), tims.len(), Vec::new(), start);

    let start = Instant::now();
    let scale = estimate_scale_tls(&tims, config)?;
    diag.scale_no_consensus = scale.no_consensus;
    let kappa = scale.scale;
    let scale_res = scale.inliers.iter().map(|&e| (tims.delta_q[e].norm() - kappa * tims.delta_p[e].norm()).abs()).collect();
    diag.push("scale", tims.len(), scale.inliers.len(), scale_res, start);

    let mut clique_nodes: Option<Vec<usize>> = None;
    let mut working: TimSet = tims.clone();
    if config.use_clique(corr.len()) {
        let start = Instant::now();
        let pruned = prune_max_clique(&tims, kappa, config);
        diag.clique_singleton = pruned.singleton;
        diag.clique_exact = Some(pruned.exact);
        let res = (0..pruned.tims.len()).map(|e| (pruned.tims.delta_q[e].norm() - kappa * pruned.tims.delta_p[e].norm()).abs()).collect();
        diag.push("clique", tims.len(), pruned.tims.len(), res, start);
        if pruned.tims.len() >= 3 {
            clique_nodes = Some(pruned.clique);
            working = pruned.tims;
        }
    }

    let start = Instant::now();
    let rot = estimate_rotation_gnc(&working, kappa, config).map_err(registration_error)?;
    diag.rotation_diverged = rot.diverged;
    let rot_res = rot.inliers.iter().map(|&e| (working.delta_q[e] / kappa - rot.rotation * working.delta_p[e]).norm()).collect();
    diag.push("rotation", working.len(), rot.inliers.len(), rot_res, start);
    let inlier_edges: Vec<(usize, usize)> = rot.inliers.iter().map(|&e| working.edges[e]).collect();

    let start = Instant::now();
    let mut subset: Vec<usize> = (0..corr.len()).collect();
    if config.translation_from_inliers {
        let from_edges = working.subset(&rot.inliers).nodes();
        if let Some(nodes) = clique_nodes.filter(|c| c.len() >= 3) {
            subset = nodes;
        } else if from_edges.len() >= 3 {
            subset = from_edges;
        }
    }
    let sub = corr.subset(&subset);
    let trans = estimate_translation_tls(&sub, source, target, kappa, &rot.rotation, config)?;
    diag.translation_no_consensus = trans.no_consensus;
    let inlier_pairs: Vec<usize> = trans.inliers.iter().map(|&i| subset[i]).collect();
    let transform = RigidTransform::new(rot.rotation, trans.translation).with_scale(kappa);
    let trans_res = inlier_pairs
        .iter()
        .map(|&i| {
            let (s, t) = corr.pairs[i];
            (target.points[t] - transform.apply(&source.points[s])).norm()
        })
        .collect();
    diag.push("translation", sub.len(), inlier_pairs.len(), trans_res, start);

    Ok(CoarseResult { transform, correspondences: corr.clone(), inlier_edges, inlier_pairs, diagnostics: diag })
}

fn with_geometry(cloud: &PointCloud, k: usize) -> Result<PointCloud> {
    if cloud.normals.is_some() && cloud.curvatures.is_some() {
        return Ok(cloud.clone());
    }
    estimate_normals_and_curvature(cloud, k, NormalOrientation::AwayFromCentroid)
}

/// Full coarse registration of `source` onto `target`: curvature-weighted
/// sampling, FPFH matching, then [`register_correspondences`].
///
/// Normals and curvatures are estimated when either cloud lacks them.
pub fn coarse_register(source: &PointCloud, target: &PointCloud, config: &CoarseConfig, seed: u64) -> Result<CoarseResult> {
    config.validate()?;
    source.ensure_non_empty()?;
    target.ensure_non_empty()?;
    let start = Instant::now();
    let src = with_geometry(source, config.normal_k)?;
    let tgt = with_geometry(target, config.normal_k)?;

    let src_idx = curvature_weighted_sample(&src, config.source_samples.min(src.len()), seed)?;
    let tgt_idx = match config.target_samples {
        Some(n) if n < tgt.len() => curvature_weighted_sample(&tgt, n, seed.wrapping_add(1))?,
        _ => (0..tgt.len()).collect(),
    };
    let src_desc = compute_fpfh(&src, &src_idx, config.feature_radius)?;
    let tgt_desc = compute_fpfh(&tgt, &tgt_idx, config.feature_radius)?;
    let tau = default_tau(&src_desc, &tgt_desc, config.tau_factor)
        .ok_or_else(|| Error::RegistrationFailed("source descriptors are all isolated or identical".into()))?;
    let curvatures = src.curvatures.as_ref().expect("curvatures estimated");
    let src_curv: Vec<f64> = src_idx.iter().map(|&i| curvatures[i]).collect();
    let corr = match_descriptors(&src_desc, &tgt_desc, tau, &src_curv, MatchOptions { mutual: config.mutual_matching })
        .map_err(registration_error)?;
    let features_ms = start.elapsed().as_secs_f64() * 1e3;

    let cfg = CoarseConfig { sampling_seed: seed, ..config.clone() };
    let mut result = register_correspondences(&corr, &src, &tgt, &cfg)?;
    result.diagnostics.stages.insert(
        0,
        StageDiagnostic {
            stage: "features".into(),
            input_count: src_idx.len(),
            inlier_count: corr.len(),
            residual_median: median(corr.distances.clone()),
            wall_time_ms: features_ms,
        },
    );
    Ok(result)
}
