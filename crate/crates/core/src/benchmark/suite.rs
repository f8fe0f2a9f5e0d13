use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::methods::{Builtin, BuiltinKind, RegistrationMethod};
use super::score::{composite_score, evaluate_method, BenchmarkRecord, ScoreTable, DEFAULT_SUCCESS_THRESHOLD};
use super::{generate_test_case, normalize_to_diagonal, Surrogate, NORMALIZED_DIAGONAL};
use crate::coarse::CoarseConfig;
use crate::error::{line_of_offset, Error, Result};
use crate::geometry::PointCloud;
use crate::icp::IcpConfig;
use crate::io::load_any;

/// Benchmark grid: every mesh × overlap × rotation × seed, run by every method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    /// Surrogate ids or PLY/OBJ paths relative to the config file.
    pub meshes: Vec<String>,
    /// Points generated per surrogate mesh.
    pub mesh_points: usize,
    pub overlaps: Vec<f64>,
    pub rotations_deg: Vec<f64>,
    pub seeds: Vec<u64>,
    pub noise_sigma: f64,
    pub partial_fraction: f64,
    pub methods: Vec<String>,
    pub lambdas: Vec<f64>,
    pub success_threshold_mm: f64,
    pub coarse: CoarseConfig,
    pub icp: IcpConfig,
    /// Configuration of `fast_icp`; no time budget by default.
    pub fast_icp: IcpConfig,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            meshes: vec![Surrogate::RidgedEllipsoid.id().into(), Surrogate::HelicalTube.id().into()],
            mesh_points: 30_000,
            overlaps: vec![0.2, 0.6],
            rotations_deg: vec![0.0, 20.0, 40.0, 60.0, 80.0, 100.0],
            seeds: vec![0, 1, 2],
            noise_sigma: 0.33,
            partial_fraction: 0.5,
            methods: vec![BuiltinKind::Pipeline.id().into(), BuiltinKind::FastIcp.id().into()],
            lambdas: vec![0.7, 0.15],
            success_threshold_mm: DEFAULT_SUCCESS_THRESHOLD,
            coarse: CoarseConfig::default(),
            icp: IcpConfig::default(),
            fast_icp: IcpConfig { budget_ms: None, ..IcpConfig::fast() },
        }
    }
}

/// Line of the first `key = …` assignment, or 0 when the key is absent.
fn key_line(text: &str, key: &str) -> usize {
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        if let Some(rest) = line.trim_start().strip_prefix(key) {
            if rest.trim_start().starts_with('=') {
                return line_of_offset(text, offset);
            }
        }
        offset += line.len();
    }
    0
}

impl SuiteConfig {
    /// Parses and validates a TOML suite description.
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| crate::config_error(text, &e))?;
        config.check().map_err(|(key, message)| Error::Config { line: key_line(text, key), message })?;
        Ok(config)
    }

    fn check(&self) -> std::result::Result<(), (&'static str, String)> {
        let nonempty = [
            ("meshes", self.meshes.is_empty()),
            ("overlaps", self.overlaps.is_empty()),
            ("rotations_deg", self.rotations_deg.is_empty()),
            ("seeds", self.seeds.is_empty()),
            ("methods", self.methods.is_empty()),
            ("lambdas", self.lambdas.is_empty()),
        ];
        if let Some((key, _)) = nonempty.iter().find(|(_, empty)| *empty) {
            return Err((key, format!("{key} must not be empty")));
        }
        if let Some(o) = self.overlaps.iter().find(|o| !(**o > 0.0 && **o <= 1.0)) {
            return Err(("overlaps", format!("overlap {o} outside (0, 1]")));
        }
        if let Some(r) = self.rotations_deg.iter().find(|r| !(**r >= 0.0 && r.is_finite())) {
            return Err(("rotations_deg", format!("rotation {r} must be non-negative")));
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            return Err(("lambdas", format!("lambda {l} outside [0, 1]")));
        }
        for m in &self.methods {
            m.parse::<BuiltinKind>().map_err(|e| ("methods", e.to_string()))?;
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(("noise_sigma", "noise_sigma must be non-negative".into()));
        }
        if !(self.partial_fraction > 0.0 && self.partial_fraction <= 1.0) {
            return Err(("partial_fraction", "partial_fraction must lie in (0, 1]".into()));
        }
        if !(self.success_threshold_mm > 0.0) {
            return Err(("success_threshold_mm", "success_threshold_mm must be positive".into()));
        }
        if self.mesh_points < 1000 {
            return Err(("mesh_points", "mesh_points must be at least 1000".into()));
        }
        self.coarse.validate().map_err(|e| ("coarse", e.to_string()))?;
        self.icp.validate().map_err(|e| ("icp", e.to_string()))?;
        self.fast_icp.validate().map_err(|e| ("fast_icp", e.to_string()))?;
        Ok(())
    }

    pub fn builtin_methods(&self) -> Result<Vec<Box<dyn RegistrationMethod>>> {
        self.methods
            .iter()
            .map(|m| {
                let kind: BuiltinKind = m.parse()?;
                let method = Builtin { kind, coarse: self.coarse.clone(), icp: self.icp.clone(), fast: self.fast_icp.clone() };
                Ok(Box::new(method) as Box<dyn RegistrationMethod>)
            })
            .collect()
    }

    fn load_mesh(&self, name: &str, base_dir: &Path) -> Result<PointCloud> {
        if let Ok(s) = name.parse::<Surrogate>() {
            return Ok(s.generate(self.mesh_points));
        }
        let path = base_dir.join(name);
        let cloud = load_any(&path)?;
        let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or(name).to_string();
        Ok(normalize_to_diagonal(&cloud, NORMALIZED_DIAGONAL).with_id(id))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub records: Vec<BenchmarkRecord>,
    pub tables: Vec<ScoreTable>,
    pub files: Vec<PathBuf>,
}

#[derive(Serialize)]
struct RecordRow<'a> {
    method: &'a str,
    mesh_id: &'a str,
    overlap: f64,
    rotation_deg: f64,
    sigma: f64,
    partial: f64,
    seed: u64,
    rmse_mm: f64,
    runtime_ms: f64,
    success: bool,
}

#[derive(Serialize)]
struct ScoreCsvRow<'a> {
    method: &'a str,
    lambda: f64,
    median_rmse_mm: f64,
    median_runtime_ms: f64,
    e_max: f64,
    t_max: f64,
    score: f64,
    records: usize,
    success_rate: f64,
}

#[derive(Serialize)]
struct Failure<'a> {
    method: &'a str,
    mesh_id: &'a str,
    overlap: f64,
    rotation_deg: f64,
    seed: u64,
    error: &'a str,
}

#[derive(Serialize)]
struct Summary<'a> {
    config: &'a SuiteConfig,
    records: usize,
    tables: &'a [ScoreTable],
    failures: Vec<Failure<'a>>,
}

/// Runs the suite described by the TOML file at `config_path`, writing
/// `records.csv`, one `scores_lambda_<λ>.csv` per λ and `summary.json`.
pub fn run_suite(config_path: impl AsRef<Path>, out_dir: impl AsRef<Path>) -> Result<SuiteReport> {
    let config_path = config_path.as_ref();
    let text = fs::read_to_string(config_path)?;
    let config = SuiteConfig::from_toml(&text)?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let methods = config.builtin_methods()?;
    run_suite_config(&config, &methods, base, out_dir)
}

/// Runs `methods` over the grid of `config`; mesh paths resolve against `base_dir`.
pub fn run_suite_config(
    config: &SuiteConfig,
    methods: &[Box<dyn RegistrationMethod>],
    base_dir: &Path,
    out_dir: impl AsRef<Path>,
) -> Result<SuiteReport> {
    if methods.is_empty() {
        return Err(Error::Config { line: 0, message: "methods must not be empty".into() });
    }
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir)?;
    let mut records = Vec::new();
    for name in &config.meshes {
        let mesh = config.load_mesh(name, base_dir)?;
        for &overlap in &config.overlaps {
            for &rotation in &config.rotations_deg {
                for &seed in &config.seeds {
                    let case = generate_test_case(&mesh, overlap, rotation, config.noise_sigma, config.partial_fraction, seed)?;
                    for m in methods {
                        records.extend(evaluate_method(m.as_ref(), std::slice::from_ref(&case), config.success_threshold_mm)?);
                    }
                }
            }
            log::info!("benchmark: {} overlap {overlap} done ({} records)", mesh.id, records.len());
        }
    }

    let mut files = Vec::new();
    let path = out_dir.join("records.csv");
    let mut w = csv::Writer::from_path(&path)?;
    for r in &records {
        w.serialize(RecordRow {
            method: &r.method,
            mesh_id: &r.mesh_id,
            overlap: r.overlap,
            rotation_deg: r.rotation_deg,
            sigma: r.sigma,
            partial: r.partial,
            seed: r.seed,
            rmse_mm: r.rmse_mm,
            runtime_ms: r.runtime_ms,
            success: r.success,
        })?;
    }
    w.flush()?;
    files.push(path);

    let mut tables = Vec::new();
    for &lambda in &config.lambdas {
        let table = composite_score(&records, lambda)?;
        let path = out_dir.join(format!("scores_lambda_{lambda:.2}.csv"));
        let mut w = csv::Writer::from_path(&path)?;
        for row in &table.rows {
            w.serialize(ScoreCsvRow {
                method: &row.method,
                lambda,
                median_rmse_mm: row.median_rmse_mm,
                median_runtime_ms: row.median_runtime_ms,
                e_max: table.e_max,
                t_max: table.t_max,
                score: row.score,
                records: row.records,
                success_rate: row.success_rate,
            })?;
        }
        w.flush()?;
        files.push(path);
        tables.push(table);
    }

    let failures = records
        .iter()
        .filter_map(|r| {
            r.error.as_deref().map(|error| Failure {
                method: &r.method,
                mesh_id: &r.mesh_id,
                overlap: r.overlap,
                rotation_deg: r.rotation_deg,
                seed: r.seed,
                error,
            })
        })
        .collect();
    let summary = Summary { config, records: records.len(), tables: &tables, failures };
    let path = out_dir.join("summary.json");
    fs::write(&path, serde_json::to_string_pretty(&summary)?)?;
    files.push(path);
    Ok(SuiteReport { records, tables, files })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_parses_from_empty_config() {
        assert_eq!(SuiteConfig::from_toml("").unwrap(), SuiteConfig::default());
    }

    #[test]
    fn errors_carry_lines() {
        let err = SuiteConfig::from_toml("seeds = [1]\nmethods = []\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 2, .. }), "{err}");
        let err = SuiteConfig::from_toml("seeds = [1]\n\nmethods = [\"nope\"]\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 3, .. }), "{err}");
        let err = SuiteConfig::from_toml("seeds = [1]\nbogus = 3\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 2, .. }), "{err}");
        let err = SuiteConfig::from_toml("overlaps = [0.2,\n 1.5]\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 1, .. }), "{err}");
        let err = SuiteConfig::from_toml("[icp]\nmax_iterations = \"many\"\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 2, .. }), "{err}");
    }

    #[test]
    fn small_suite_writes_reports() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = "meshes = [\"bumpy_torus\"]\nmesh_points = 6000\noverlaps = [1.0]\nrotations_deg = [0, 10]\nseeds = [4]\nmethods = [\"identity\", \"fast_icp\"]\nlambdas = [0.5]\n";
        let path = dir.path().join("bench.toml");
        fs::write(&path, cfg).unwrap();
        let out = dir.path().join("out");
        let report = run_suite(&path, &out).unwrap();
        assert_eq!(report.records.len(), 4);
        let csv = fs::read_to_string(out.join("records.csv")).unwrap();
        assert!(csv.starts_with("method,mesh_id,overlap,rotation_deg,sigma,partial,seed,rmse_mm,runtime_ms,success\n"));
        assert_eq!(csv.lines().count(), 5);
        assert!(out.join("scores_lambda_0.50.csv").exists());
        let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
        assert_eq!(summary["records"], 4);
    }
}
