"""Smoke test for the regkit Python module.

Build and install first, e.g. `pip install --no-build-isolation -e crates/py`
or `maturin develop -m crates/py/Cargo.toml`, then run this file.
"""

import math

import regkit


def main():
    t = regkit.RigidTransform.from_axis_angle([0, 0, 1], math.pi / 2, [1.0, 2.0, 3.0])
    p = t.apply([1.0, 0.0, 0.0])
    assert all(abs(a - b) < 1e-12 for a, b in zip(p, [1.0, 3.0, 3.0])), p
    back = t.inverse().compose(t)
    assert back.rotation_angle_to(regkit.RigidTransform.identity()) < 1e-12

    pts = [[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 3.0], [1.0, 1.0, 1.0]]
    moved = [t.apply(q) for q in pts]
    k = regkit.kabsch(pts, moved)
    assert k.rotation_angle_to(t) < 1e-9 and k.translation_distance_to(t) < 1e-9

    mid = regkit.interpolate_pose(regkit.RigidTransform.identity(), 0.0, t, 1.0, 0.5)
    assert abs(mid.rotation_angle_to(regkit.RigidTransform.identity()) - math.pi / 4) < 1e-9

    scores = dict(regkit.composite_score([("a", 4.0, 200.0), ("b", 2.0, 100.0)], 0.7))
    assert scores == {"a": 0.0, "b": 50.0}, scores

    mesh = regkit.PointCloud.surrogate("ridged_ellipsoid", 20000)
    case = regkit.generate_test_case(mesh, 0.6, 30.0, seed=2)
    result = regkit.register(case.source, case.target, seed=2)
    rmse = case.rmse(result["transform"])
    print(f"register: success={result['success']} rmse={rmse:.3f} mm correspondences={result['correspondences']}")
    assert result["success"] and rmse < 5.0

    tracker = regkit.Tracker(case.source, regkit.RigidTransform.identity())
    out = tracker.track(case.source, 0.0)
    assert out["status"] == "tracked", out

    try:
        regkit.PointCloud.surrogate("teapot")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown surrogate accepted")
    print("smoke test passed")


if __name__ == "__main__":
    main()
