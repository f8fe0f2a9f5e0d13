use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::methods::RegistrationMethod;
use super::TestCase;
use crate::error::{Error, Result};
use crate::geometry::{alignment_rmse, Pairing, RigidTransform};

pub const DEFAULT_SUCCESS_THRESHOLD: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub method: String,
    pub mesh_id: String,
    pub overlap: f64,
    pub rotation_deg: f64,
    pub sigma: f64,
    pub partial: f64,
    pub seed: u64,
    pub rmse_mm: f64,
    pub runtime_ms: f64,
    pub success: bool,
    /// Why the method produced no transform; its RMSE is then that of the identity.
    #[serde(default)]
    pub error: Option<String>,
}

/// Index-matched RMSE (mm) of `transform` against the ground truth over the
/// case's noise-free source points.
pub fn case_rmse(case: &TestCase, transform: &RigidTransform) -> Result<f64> {
    alignment_rmse(&case.clean_source, &case.clean_in_target(), transform, Pairing::IndexMatched)
}

/// Runs `method` on every case. Errors and panics become failed records
/// scored as if the method had returned the identity.
pub fn evaluate_method(method: &dyn RegistrationMethod, cases: &[TestCase], success_threshold: f64) -> Result<Vec<BenchmarkRecord>> {
    let mut records = Vec::with_capacity(cases.len());
    for case in cases {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(|| method.register(&case.source, &case.target, case.params.seed)));
        let runtime_ms = (start.elapsed().as_secs_f64() * 1e3).max(1e-6);
        let (transform, error) = match outcome {
            Ok(Ok(t)) if t.is_valid(1e-6) => (t, None),
            Ok(Ok(_)) => (RigidTransform::identity(), Some("method returned an invalid transform".to_string())),
            Ok(Err(e)) => (RigidTransform::identity(), Some(e.to_string())),
            Err(panic) => {
                let msg = panic
                    .downcast_ref::<&str>()
                    .map(|s| s.to_string())
                    .or_else(|| panic.downcast_ref::<String>().cloned())
                    .unwrap_or_else(|| "unknown panic".into());
                (RigidTransform::identity(), Some(format!("method panicked: {msg}")))
            }
        };
        if let Some(e) = &error {
            log::warn!("{} failed on {} seed {}: {e}", method.name(), case.params.mesh_id, case.params.seed);
        }
        let rmse_mm = case_rmse(case, &transform)?;
        let p = &case.params;
        records.push(BenchmarkRecord {
            method: method.name().to_string(),
            mesh_id: p.mesh_id.clone(),
            overlap: p.overlap_ratio,
            rotation_deg: p.rotation_deg,
            sigma: p.noise_sigma,
            partial: p.partial_fraction,
            seed: p.seed,
            rmse_mm,
            runtime_ms,
            success: error.is_none() && rmse_mm < success_threshold,
            error,
        });
    }
    Ok(records)
}

/// Lower median: the smaller middle element for even counts.
pub fn lower_median(values: &[f64]) -> Option<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.get((v.len().checked_sub(1)?) / 2).copied()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub method: String,
    pub median_rmse_mm: f64,
    pub median_runtime_ms: f64,
    pub score: f64,
    pub records: usize,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub lambda: f64,
    pub e_max: f64,
    pub t_max: f64,
    pub rows: Vec<ScoreRow>,
    /// With one method every score is 0, since it is its own worst case.
    pub single_method: bool,
}

impl ScoreTable {
    pub fn row(&self, method: &str) -> Option<&ScoreRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    /// Method names from best to worst score; ties keep input order.
    pub fn ranking(&self) -> Vec<&str> {
        let mut rows: Vec<&ScoreRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| b.score.total_cmp(&a.score));
        rows.into_iter().map(|r| r.method.as_str()).collect()
    }
}

/// Weighted blend of normalized median error and runtime, on a 0–100 scale:
/// `S = 100 · (1 − (λ·E/E_max + (1 − λ)·T/T_max))`.
///
/// Methods appear in order of first occurrence in `records`.
pub fn composite_score(records: &[BenchmarkRecord], lambda: f64) -> Result<ScoreTable> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    let mut methods: Vec<&str> = Vec::new();
    for r in records {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    if methods.is_empty() {
        return Err(Error::InvalidArgument("no benchmark records to score".into()));
    }
    let mut rows = Vec::with_capacity(methods.len());
    for m in &methods {
        let mine: Vec<&BenchmarkRecord> = records.iter().filter(|r| r.method == *m).collect();
        let e: Vec<f64> = mine.iter().map(|r| r.rmse_mm).collect();
        let t: Vec<f64> = mine.iter().map(|r| r.runtime_ms).collect();
        let median_rmse_mm = lower_median(&e).expect("non-empty");
        let median_runtime_ms = lower_median(&t).expect("non-empty");
        if !median_rmse_mm.is_finite() {
            return Err(Error::NonFiniteMedian(format!("RMSE of {m}")));
        }
        if !median_runtime_ms.is_finite() {
            return Err(Error::NonFiniteMedian(format!("runtime of {m}")));
        }
        let success_rate = mine.iter().filter(|r| r.success).count() as f64 / mine.len() as f64;
        rows.push(ScoreRow { method: m.to_string(), median_rmse_mm, median_runtime_ms, score: 0.0, records: mine.len(), success_rate });
    }
    let e_max = rows.iter().map(|r| r.median_rmse_mm).fold(0.0, f64::max);
    let t_max = rows.iter().map(|r| r.median_runtime_ms).fold(0.0, f64::max);
    for r in &mut rows {
        let e_term = if e_max > 0.0 { lambda * r.median_rmse_mm / e_max } else { 0.0 };
        let t_term = if t_max > 0.0 { (1.0 - lambda) * r.median_runtime_ms / t_max } else { 0.0 };
        r.score = 100.0 * (1.0 - (e_term + t_term));
    }
    let single_method = rows.len() == 1;
    if single_method {
        log::warn!("composite score over a single method is 0 by construction");
    }
    Ok(ScoreTable { lambda, e_max, t_max, rows, single_method })
}
