use std::fs;

use regkit::benchmark::{run_suite, run_suite_config, BenchmarkRecord, FnMethod, RegistrationMethod, SuiteConfig};
use regkit::RigidTransform;

fn small_config() -> SuiteConfig {
    SuiteConfig {
        meshes: vec!["bumpy_torus".into()],
        mesh_points: 8000,
        overlaps: vec![0.6, 1.0],
        rotations_deg: vec![0.0, 20.0],
        seeds: vec![0, 1],
        methods: vec!["identity".into(), "fast_icp".into()],
        lambdas: vec![0.5],
        ..SuiteConfig::default()
    }
}

fn without_runtime(records: &[BenchmarkRecord]) -> Vec<BenchmarkRecord> {
    records.iter().cloned().map(|r| BenchmarkRecord { runtime_ms: 0.0, ..r }).collect()
}

#[test]
fn default_grid_has_144_records() {
    let c = SuiteConfig::default();
    let cases = c.meshes.len() * c.overlaps.len() * c.rotations_deg.len() * c.seeds.len();
    assert_eq!(cases * c.methods.len(), 144);
}

#[test]
fn record_count_and_determinism() {
    let config = small_config();
    let methods = config.builtin_methods().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let a = run_suite_config(&config, &methods, dir.path(), dir.path().join("a")).unwrap();
    let b = run_suite_config(&config, &methods, dir.path(), dir.path().join("b")).unwrap();
    assert_eq!(a.records.len(), 16);
    assert_eq!(without_runtime(&a.records), without_runtime(&b.records));

    let csv = fs::read_to_string(dir.path().join("a/records.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "method,mesh_id,overlap,rotation_deg,sigma,partial,seed,rmse_mm,runtime_ms,success");
    assert_eq!(lines.count(), 16);
    let identity_rows = a.records.iter().filter(|r| r.method == "identity" && r.rotation_deg == 0.0);
    assert!(identity_rows.clone().count() == 4 && identity_rows.clone().all(|r| r.rmse_mm < 60.0 * 3f64.sqrt()));
}

#[test]
fn failing_methods_are_scored_as_identity() {
    let config =
        SuiteConfig { methods: vec!["identity".into()], overlaps: vec![1.0], rotations_deg: vec![30.0], seeds: vec![3], ..small_config() };
    let broken: Box<dyn RegistrationMethod> =
        Box::new(FnMethod::new("broken", |_: &regkit::PointCloud, _: &regkit::PointCloud, _: u64| -> regkit::Result<RigidTransform> {
            panic!("boom")
        }));
    let methods = vec![config.builtin_methods().unwrap().remove(0), broken];
    let dir = tempfile::tempdir().unwrap();
    let report = run_suite_config(&config, &methods, dir.path(), dir.path()).unwrap();
    let (id, br) = (&report.records[0], &report.records[1]);
    assert_eq!(id.rmse_mm, br.rmse_mm);
    assert!(br.error.as_deref().unwrap().contains("boom"));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["failures"].as_array().unwrap().len(), 1);
}

#[test]
fn config_errors_point_at_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("suite.toml");
    fs::write(&path, "seeds = [0]\noverlaps = [0.5, 1.5]\n").unwrap();
    let err = run_suite(&path, dir.path().join("out")).unwrap_err();
    assert!(matches!(err, regkit::Error::Config { line: 2, .. }), "{err}");
    fs::write(&path, "seeds = [0]\n\nmesh_pionts = 10\n").unwrap();
    let err = run_suite(&path, dir.path().join("out")).unwrap_err();
    assert!(matches!(err, regkit::Error::Config { line: 3, .. }), "{err}");
}
