use std::fs;
use std::path::Path;
use std::process::Command;

use regkit::benchmark::{generate_test_case, Surrogate};
use regkit::geometry::{voxel_downsample, PointCloud, RigidTransform, Vec3};
use regkit::io::{write_ply_ascii, write_ply_binary};

fn regkit(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_regkit")).args(args).output().unwrap();
    let text = String::from_utf8_lossy(&out.stderr).to_string() + &String::from_utf8_lossy(&out.stdout);
    (out.status.code().unwrap(), text)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(regkit(&[]).0, 1);
    assert_eq!(regkit(&["register", "--source", "a.ply"]).0, 1);
    assert_eq!(regkit(&["frobnicate"]).0, 1);
    let (code, text) = regkit(&["correct", "--scene", "s.ply", "--gt", "g.csv", "--region", "1,2", "--out", "o.ply", "--model", "m.json"]);
    assert_eq!(code, 1, "{text}");
    let (code, text) = regkit(&["register", "--source", "/nonexistent/a.ply", "--target", "/nonexistent/b.ply", "--out", "/tmp/x.json"]);
    assert_eq!(code, 1, "{text}");
    assert_eq!(regkit(&["--help"]).0, 0);
}

#[test]
fn register_writes_pose() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = Surrogate::RidgedEllipsoid.generate(30_000);
    let case = generate_test_case(&mesh, 0.6, 30.0, 0.33, 0.5, 1).unwrap();
    let (s, t, out) = (dir.path().join("s.ply"), dir.path().join("t.ply"), dir.path().join("pose.json"));
    write_ply_binary(&s, &case.source).unwrap();
    write_ply_ascii(&t, &case.target).unwrap();
    let (code, text) = regkit(&["register", "--source", p(&s), "--target", p(&t), "--out", p(&out)]);
    assert_eq!(code, 0, "{text}");
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let r: Vec<f64> = json["rotation_row_major_9"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let tr: Vec<f64> = json["translation_mm_3"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let est = RigidTransform::from_row_major(&r.try_into().unwrap(), &tr.try_into().unwrap(), 1.0).unwrap();
    assert!(est.rotation_angle_to(&case.ground_truth).to_degrees() < 2.0);
    assert_eq!(json["success"], true);

    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "seed = 1\n[coarse]\nfeature_radus = 3\n").unwrap();
    let (code, text) = regkit(&["register", "--source", p(&s), "--target", p(&t), "--out", p(&out), "--config", p(&cfg)]);
    assert_eq!(code, 1);
    assert!(text.contains("line 3"), "{text}");
}

#[test]
fn register_failure_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let target = Surrogate::BumpyTorus.generate(8000);
    // a straight line segment has no surface to match
    let source = PointCloud::new((0..200).map(|i| Vec3::new(i as f64 * 0.5, 0.0, 0.0)).collect());
    let (s, t, out) = (dir.path().join("s.ply"), dir.path().join("t.ply"), dir.path().join("pose.json"));
    write_ply_binary(&s, &source).unwrap();
    write_ply_binary(&t, &target).unwrap();
    let (code, text) = regkit(&["register", "--source", p(&s), "--target", p(&t), "--out", p(&out)]);
    assert_eq!(code, 2, "{text}");
}

#[test]
fn correct_writes_scene_and_model() {
    let dir = tempfile::tempdir().unwrap();
    let mut truth = Vec::new();
    for i in 0..40 {
        for j in 0..40 {
            truth.push(Vec3::new(i as f64 * 2.5 - 50.0, j as f64 * 2.5 - 50.0, 0.0));
        }
    }
    let bias = RigidTransform::from_axis_angle(&Vec3::x(), 0.02, Vec3::new(0.0, 0.0, 2.0));
    let scene = PointCloud::new(truth.iter().map(|p| bias.apply(p)).collect());
    let (s, g, out, model) = (dir.path().join("s.ply"), dir.path().join("gt.csv"), dir.path().join("c.ply"), dir.path().join("m.json"));
    write_ply_binary(&s, &scene).unwrap();
    let csv: String = std::iter::once("x_mm,y_mm,z_mm\n".to_string())
        .chain(truth.iter().step_by(7).map(|p| format!("{},{},{}\n", p.x, p.y, p.z)))
        .collect();
    fs::write(&g, csv).unwrap();
    let (code, text) =
        regkit(&["correct", "--scene", p(&s), "--gt", p(&g), "--region", "0,0,0,200", "--out", p(&out), "--model", p(&model)]);
    assert_eq!(code, 0, "{text}");
    let corrected = regkit::io::read_ply(&out).unwrap();
    let worst = corrected.points.iter().zip(&truth).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(worst < 0.05, "{worst}");
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(m["radius_mm"], 200.0);
}

#[test]
fn track_writes_pose_stream() {
    let dir = tempfile::tempdir().unwrap();
    let full = Surrogate::RidgedEllipsoid.generate(20_000);
    let model = voxel_downsample(&full, 2000);
    let frames = dir.path().join("frames");
    fs::create_dir(&frames).unwrap();
    let mut index = String::new();
    for k in 0..4 {
        let pose = RigidTransform::from_translation(Vec3::new(5.0 * k as f64, 0.0, 0.0));
        let name = format!("frame_{:06}.ply", k + 1);
        write_ply_binary(frames.join(&name), &full.transformed(&pose)).unwrap();
        index += &format!("{name} {}\n", 16670 + 33 * k);
    }
    fs::write(frames.join("frames.index"), &index).unwrap();
    let (m, init, out) = (dir.path().join("model.ply"), dir.path().join("init.json"), dir.path().join("poses.jsonl"));
    write_ply_binary(&m, &model).unwrap();
    fs::write(&init, r#"{"rotation_row_major_9": [1,0,0,0,1,0,0,0,1], "translation_mm_3": [0,0,0]}"#).unwrap();
    let (code, text) = regkit(&["track", "--model", p(&m), "--frames", p(&frames), "--init", p(&init), "--out", p(&out)]);
    assert_eq!(code, 0, "{text}");
    let lines: Vec<serde_json::Value> = fs::read_to_string(&out).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 4);
    assert!(lines.iter().all(|l| l["status"] == "tracked"));
    assert!((lines[3]["translation_mm_3"][0].as_f64().unwrap() - 15.0).abs() < 0.1);
    assert_eq!(lines[2]["timestamp_ms"], 16736.0);

    // the object leaves the scene in the last frame
    write_ply_binary(frames.join("gone.ply"), &PointCloud::new(vec![Vec3::repeat(5000.0)])).unwrap();
    fs::write(frames.join("frames.index"), index + "gone.ply 20000\n").unwrap();
    let (code, text) = regkit(&["track", "--model", p(&m), "--frames", p(&frames), "--init", p(&init), "--out", p(&out)]);
    assert_eq!(code, 2, "{text}");
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 5);
}

#[test]
fn benchmark_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bench.toml");
    fs::write(&cfg, "meshes = [\"bumpy_torus\"]\nmesh_points = 6000\noverlaps = [1.0]\nrotations_deg = [0]\nseeds = [0]\nmethods = [\"identity\"]\nlambdas = [0.7]\n").unwrap();
    let out = dir.path().join("report");
    let (code, text) = regkit(&["benchmark", "--config", p(&cfg), "--out-dir", p(&out)]);
    assert_eq!(code, 0, "{text}");
    assert!(out.join("records.csv").exists() && out.join("summary.json").exists() && out.join("scores_lambda_0.70.csv").exists());
    fs::write(&cfg, "methods = []\n").unwrap();
    let (code, text) = regkit(&["benchmark", "--config", p(&cfg), "--out-dir", p(&out)]);
    assert_eq!(code, 1);
    assert!(text.contains("line 1"), "{text}");
}
