use nalgebra::{Matrix3, UnitQuaternion};
use proptest::prelude::*;

use regkit::benchmark::{composite_score, BenchmarkRecord};
use regkit::coarse::{solve_tls_1d, tls_objective, Measurement};
use regkit::features::curvature_weighted_sample;
use regkit::geometry::{exp_so3, kabsch_align, log_so3, PointCloud, PoseRecord, RigidTransform, Vec3};
use regkit::icp::crop_aabb;
use regkit::tracker::interpolate_pose;

fn vec3(r: f64) -> impl Strategy<Value = Vec3> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn transform() -> impl Strategy<Value = RigidTransform> {
    (vec3(1.0), 0.0..std::f64::consts::PI, vec3(200.0))
        .prop_filter_map("zero axis", |(axis, angle, t)| axis.try_normalize(1e-3).map(|a| RigidTransform::from_axis_angle(&a, angle, t)))
}

fn record(method: &str, rmse: f64, runtime: f64) -> BenchmarkRecord {
    BenchmarkRecord {
        method: method.into(),
        mesh_id: "m".into(),
        overlap: 1.0,
        rotation_deg: 0.0,
        sigma: 0.0,
        partial: 1.0,
        seed: 0,
        rmse_mm: rmse,
        runtime_ms: runtime,
        success: rmse < 5.0,
        error: None,
    }
}

fn orthonormal(r: &Matrix3<f64>, tol: f64) -> bool {
    (r.transpose() * r - Matrix3::identity()).norm() < tol && (r.determinant() - 1.0).abs() < tol
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn kabsch_rotation_is_proper(src in prop::collection::vec(vec3(100.0), 3..60), noise in prop::collection::vec(vec3(30.0), 60)) {
        let tgt: Vec<Vec3> = src.iter().zip(&noise).map(|(p, n)| p + n).collect();
        if let Ok(t) = kabsch_align(&src, &tgt) {
            prop_assert!(orthonormal(&t.rotation, 1e-9));
        }
    }

    #[test]
    fn kabsch_recovers_exact_motion(src in prop::collection::vec(vec3(100.0), 4..40), truth in transform()) {
        let tgt: Vec<Vec3> = src.iter().map(|p| truth.apply(p)).collect();
        let spread = src.iter().map(|p| (p - src[0]).norm()).fold(0.0, f64::max);
        prop_assume!(spread > 1.0);
        let est = kabsch_align(&src, &tgt).unwrap();
        let worst = src.iter().map(|p| (est.apply(p) - truth.apply(p)).norm()).fold(0.0, f64::max);
        prop_assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn compose_with_inverse_is_identity(t in transform(), p in vec3(500.0)) {
        let q = t.inverse().compose(&t).apply(&p);
        prop_assert!((q - p).norm() < 1e-9);
    }

    #[test]
    fn exp_log_round_trip(w in vec3(3.0)) {
        prop_assume!(w.norm() < 3.1);
        let r = exp_so3(&w);
        prop_assert!(orthonormal(&r, 1e-12));
        prop_assert!((log_so3(&r) - w).norm() < 1e-9);
    }

    #[test]
    fn pose_record_round_trip(t in transform()) {
        let rec = PoseRecord::from(&t);
        let back = RigidTransform::try_from(&rec).unwrap();
        prop_assert!(back.rotation_angle_to(&t) < 1e-12 && back.translation_distance_to(&t) < 1e-12);
    }

    #[test]
    fn interpolation_hits_endpoints(a in transform(), b in transform(), t_a in -1e3..1e3f64, dt in 1.0..1e3f64) {
        let t_b = t_a + dt;
        let at_a = interpolate_pose(&a, t_a, &b, t_b, t_a).unwrap();
        let at_b = interpolate_pose(&a, t_a, &b, t_b, t_b).unwrap();
        prop_assert!(at_a.rotation_angle_to(&a) < 1e-9 && at_a.translation_distance_to(&a) < 1e-9);
        prop_assert!(at_b.rotation_angle_to(&b) < 1e-9 && at_b.translation_distance_to(&b) < 1e-9);
    }

    #[test]
    fn interpolation_follows_short_arc(a in transform(), b in transform(), s in 0.0..1.0f64) {
        let mid = interpolate_pose(&a, 0.0, &b, 1.0, s).unwrap();
        let total = a.rotation_angle_to(&b);
        prop_assert!(orthonormal(&mid.rotation, 1e-9));
        prop_assert!(total <= std::f64::consts::PI + 1e-9);
        prop_assert!((a.rotation_angle_to(&mid) - s * total).abs() < 1e-6);
        prop_assert!((mid.translation - (a.translation + s * (b.translation - a.translation))).norm() < 1e-9);
    }

    #[test]
    fn tls_minimum_is_global(
        values in prop::collection::vec((-50.0..50.0f64, 0.1..3.0f64, 0.1..2.0f64), 1..25),
        probes in prop::collection::vec(-60.0..60.0f64, 50),
    ) {
        let ms: Vec<Measurement> = values.iter().map(|&(value, bound, weight)| Measurement { value, bound, weight }).collect();
        let sol = solve_tls_1d(&ms, 1.0);
        prop_assert!((tls_objective(&ms, 1.0, sol.minimizer) - sol.objective).abs() < 1e-9);
        for x in probes.iter().copied().chain(ms.iter().map(|m| m.value)) {
            prop_assert!(sol.objective <= tls_objective(&ms, 1.0, x) + 1e-9);
        }
        for &i in &sol.consensus {
            prop_assert!((sol.minimizer - ms[i].value).abs() <= ms[i].bound + 1e-12);
        }
    }

    #[test]
    fn scores_are_bounded_and_rank_invariant_under_scaling(
        rows in prop::collection::vec((0.0..50.0f64, 1.0..5e3f64), 2..8),
        lambda in 0.0..=1.0f64,
        k in 0.01..100.0f64,
    ) {
        let names: Vec<String> = (0..rows.len()).map(|i| format!("m{i}")).collect();
        let records: Vec<BenchmarkRecord> = rows.iter().zip(&names).map(|(&(e, t), n)| record(n, e, t)).collect();
        let scaled: Vec<BenchmarkRecord> = rows.iter().zip(&names).map(|(&(e, t), n)| record(n, e * k, t * k)).collect();
        let a = composite_score(&records, lambda).unwrap();
        let b = composite_score(&scaled, lambda).unwrap();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            prop_assert!(x.score >= -1e-9 && x.score <= 100.0 + 1e-9);
            prop_assert!((x.score - y.score).abs() < 1e-9);
        }
        prop_assert_eq!(a.ranking(), b.ranking());
    }

    #[test]
    fn crop_keeps_the_whole_posed_model(
        model in prop::collection::vec(vec3(50.0), 1..50),
        clutter in prop::collection::vec(vec3(400.0), 0..200),
        pose in transform(),
        margin in 0.0..30.0f64,
    ) {
        let model = PointCloud::new(model);
        let moved = model.transformed(&pose);
        let scene = PointCloud::new(moved.points.iter().chain(&clutter).copied().collect());
        let crop = crop_aabb(&scene, &model, &pose, margin).unwrap();
        prop_assert!(crop.len() >= model.len() && crop.len() <= scene.len());
        for p in &moved.points {
            prop_assert!(crop.points.iter().any(|q| q == p));
        }
    }

    #[test]
    fn curvature_sampling_draws_distinct_sorted_indices(curv in prop::collection::vec(0.0..1.0f64, 1..200), n in 1usize..250, seed in any::<u64>()) {
        let cloud = PointCloud::new(vec![Vec3::zeros(); curv.len()]).with_curvatures(curv.clone());
        let n = n.min(curv.len());
        let idx = curvature_weighted_sample(&cloud, n, seed).unwrap();
        prop_assert_eq!(idx.len(), n);
        prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(idx.iter().all(|&i| i < curv.len()));
        prop_assert_eq!(idx, curvature_weighted_sample(&cloud, n, seed).unwrap());
    }

    #[test]
    fn quaternion_and_matrix_agree(t in transform()) {
        let q: UnitQuaternion<f64> = t.quaternion();
        prop_assert!((q.to_rotation_matrix().into_inner() - t.rotation).norm() < 1e-12);
    }
}
