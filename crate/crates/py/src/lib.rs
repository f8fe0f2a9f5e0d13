//! Python bindings: point clouds, transforms, registration, refinement,
//! region correction, tracking and benchmark scoring.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use regkit::benchmark::{composite_score, generate_test_case, BenchmarkRecord, Surrogate, TestCase};
use regkit::correction::{apply_region_correction, fit_region_correction, pair_ground_truth, CorrectionModel, RegionSpec};
use regkit::geometry::{estimate_normals, kabsch_align, NormalOrientation, PointCloud, RigidTransform, Vec3};
use regkit::icp::{icp_fast, icp_refine, IcpConfig, IcpResult};
use regkit::register::{register, RegistrationConfig};
use regkit::tracker::{interpolate_pose, track_frame, tracker_init, Frame, TrackerState};
use regkit::Error;

create_exception!(regkit, RegkitError, PyRuntimeError, "A registration, tracking or I/O operation failed.");

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidArgument(_) | Error::Config { .. } | Error::EmptyCloud => PyValueError::new_err(e.to_string()),
        e => RegkitError::new_err(e.to_string()),
    }
}

fn vec3(p: [f64; 3]) -> Vec3 {
    Vec3::new(p[0], p[1], p[2])
}

fn arr(p: &Vec3) -> [f64; 3] {
    [p.x, p.y, p.z]
}

#[pyclass(name = "RigidTransform", module = "regkit", from_py_object)]
#[derive(Clone, Copy)]
pub struct PyTransform {
    inner: RigidTransform,
}

#[pymethods]
impl PyTransform {
    /// Rotation given as 9 row-major values, translation in mm.
    #[new]
    #[pyo3(signature = (rotation_row_major_9 = None, translation_mm_3 = None))]
    fn new(rotation_row_major_9: Option<[f64; 9]>, translation_mm_3: Option<[f64; 3]>) -> PyResult<Self> {
        let r = rotation_row_major_9.unwrap_or([1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let t = translation_mm_3.unwrap_or([0.0; 3]);
        Ok(Self { inner: RigidTransform::from_row_major(&r, &t, 1.0).map_err(to_py)? })
    }

    #[staticmethod]
    fn identity() -> Self {
        Self { inner: RigidTransform::identity() }
    }

    /// Rotation of `angle_rad` about `axis`, then `translation`.
    #[staticmethod]
    #[pyo3(signature = (axis, angle_rad, translation = [0.0, 0.0, 0.0]))]
    fn from_axis_angle(axis: [f64; 3], angle_rad: f64, translation: [f64; 3]) -> PyResult<Self> {
        let a = vec3(axis);
        if !(a.norm() > 0.0) {
            return Err(PyValueError::new_err("axis must be non-zero"));
        }
        Ok(Self { inner: RigidTransform::from_axis_angle(&a, angle_rad, vec3(translation)) })
    }

    #[getter]
    fn rotation(&self) -> [[f64; 3]; 3] {
        let r = &self.inner.rotation;
        [[r[(0, 0)], r[(0, 1)], r[(0, 2)]], [r[(1, 0)], r[(1, 1)], r[(1, 2)]], [r[(2, 0)], r[(2, 1)], r[(2, 2)]]]
    }

    #[getter]
    fn translation(&self) -> [f64; 3] {
        arr(&self.inner.translation)
    }

    fn apply(&self, point: [f64; 3]) -> [f64; 3] {
        arr(&self.inner.apply(&vec3(point)))
    }

    fn inverse(&self) -> Self {
        Self { inner: self.inner.inverse() }
    }

    /// `self ∘ other`: apply `other` first.
    fn compose(&self, other: &PyTransform) -> Self {
        Self { inner: self.inner.compose(&other.inner) }
    }

    /// Geodesic rotation distance in radians.
    fn rotation_angle_to(&self, other: &PyTransform) -> f64 {
        self.inner.rotation_angle_to(&other.inner)
    }

    fn translation_distance_to(&self, other: &PyTransform) -> f64 {
        self.inner.translation_distance_to(&other.inner)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| RegkitError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        let t = self.inner.translation;
        format!("RigidTransform(angle={:.6} rad, translation=[{:.4}, {:.4}, {:.4}])", self.inner.rotation_angle(), t.x, t.y, t.z)
    }
}

#[pyclass(name = "PointCloud", module = "regkit", from_py_object)]
#[derive(Clone)]
pub struct PyPointCloud {
    inner: PointCloud,
}

#[pymethods]
impl PyPointCloud {
    #[new]
    fn new(points: Vec<[f64; 3]>) -> Self {
        Self { inner: PointCloud::new(points.into_iter().map(vec3).collect()) }
    }

    /// Reads a PLY or OBJ file.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self { inner: regkit::io::load_any(path).map_err(to_py)? })
    }

    /// Procedural test surface: ridged_ellipsoid, helical_tube or bumpy_torus.
    #[staticmethod]
    #[pyo3(signature = (name, n = 20000))]
    fn surrogate(name: &str, n: usize) -> PyResult<Self> {
        let s: Surrogate = name.parse().map_err(to_py)?;
        Ok(Self { inner: s.generate(n) })
    }

    fn save_ply(&self, path: &str) -> PyResult<()> {
        regkit::io::write_ply_binary(path, &self.inner).map_err(to_py)
    }

    #[getter]
    fn points(&self) -> Vec<[f64; 3]> {
        self.inner.points.iter().map(arr).collect()
    }

    #[getter]
    fn normals(&self) -> Option<Vec<[f64; 3]>> {
        self.inner.normals.as_ref().map(|n| n.iter().map(arr).collect())
    }

    #[getter]
    fn id(&self) -> String {
        self.inner.id.clone()
    }

    fn transformed(&self, transform: &PyTransform) -> Self {
        Self { inner: self.inner.transformed(&transform.inner) }
    }

    /// PCA normals from `k` neighbors, oriented away from the centroid.
    #[pyo3(signature = (k = 24))]
    fn with_normals(&self, k: usize) -> PyResult<Self> {
        Ok(Self { inner: estimate_normals(&self.inner, k, NormalOrientation::AwayFromCentroid).map_err(to_py)? })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("PointCloud(id={:?}, points={})", self.inner.id, self.inner.len())
    }
}

fn icp_dict<'py>(py: Python<'py>, r: &IcpResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("transform", PyTransform { inner: r.transform })?;
    d.set_item("iterations", r.iterations)?;
    d.set_item("energy", r.energy)?;
    d.set_item("inlier_rmse", r.inlier_rmse)?;
    d.set_item("inlier_fraction", r.inlier_fraction)?;
    d.set_item("converged", r.converged)?;
    d.set_item("success", r.success)?;
    Ok(d)
}

/// Least-squares rigid transform taking `source[i]` onto `target[i]`.
#[pyfunction]
fn kabsch(source: Vec<[f64; 3]>, target: Vec<[f64; 3]>) -> PyResult<PyTransform> {
    let s: Vec<Vec3> = source.into_iter().map(vec3).collect();
    let t: Vec<Vec3> = target.into_iter().map(vec3).collect();
    Ok(PyTransform { inner: kabsch_align(&s, &t).map_err(to_py)? })
}

/// Global registration followed by robust ICP. `config` is TOML text.
#[pyfunction(name = "register")]
#[pyo3(signature = (source, target, seed = 0, config = None))]
fn py_register<'py>(
    py: Python<'py>,
    source: &PyPointCloud,
    target: &PyPointCloud,
    seed: u64,
    config: Option<&str>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = match config {
        Some(text) => RegistrationConfig::from_toml(text).map_err(to_py)?,
        None => RegistrationConfig::default(),
    };
    cfg.seed = seed;
    let (s, t) = (source.inner.clone(), target.inner.clone());
    let reg = py.detach(move || register(&s, &t, &cfg)).map_err(to_py)?;
    let d = icp_dict(py, &reg.refine)?;
    d.set_item("coarse_transform", PyTransform { inner: reg.coarse.transform })?;
    d.set_item("correspondences", reg.coarse.correspondences.len())?;
    Ok(d)
}

/// Robust point-to-plane ICP; the target needs normals.
#[pyfunction(name = "icp_refine")]
fn py_icp_refine<'py>(py: Python<'py>, source: &PyPointCloud, target: &PyPointCloud, init: &PyTransform) -> PyResult<Bound<'py, PyDict>> {
    let r = icp_refine(&source.inner, &target.inner, &init.inner, &IcpConfig::default()).map_err(to_py)?;
    icp_dict(py, &r)
}

/// Accelerated point-to-point ICP with the default 250 ms budget.
#[pyfunction(name = "icp_fast")]
fn py_icp_fast<'py>(py: Python<'py>, source: &PyPointCloud, target: &PyPointCloud, init: &PyTransform) -> PyResult<Bound<'py, PyDict>> {
    let r = icp_fast(&source.inner, &target.inner, &init.inner, &IcpConfig::fast()).map_err(to_py)?;
    icp_dict(py, &r)
}

#[pyclass(name = "TestCase", module = "regkit", skip_from_py_object)]
pub struct PyTestCase {
    inner: TestCase,
}

#[pymethods]
impl PyTestCase {
    #[getter]
    fn source(&self) -> PyPointCloud {
        PyPointCloud { inner: self.inner.source.clone() }
    }

    #[getter]
    fn target(&self) -> PyPointCloud {
        PyPointCloud { inner: self.inner.target.clone() }
    }

    #[getter]
    fn ground_truth(&self) -> PyTransform {
        PyTransform { inner: self.inner.ground_truth }
    }

    #[getter]
    fn achieved_overlap(&self) -> f64 {
        self.inner.achieved_overlap
    }

    /// Index-matched RMSE (mm) of `transform` on the noise-free source points.
    fn rmse(&self, transform: &PyTransform) -> PyResult<f64> {
        regkit::benchmark::case_rmse(&self.inner, &transform.inner).map_err(to_py)
    }
}

#[pyfunction(name = "generate_test_case")]
#[pyo3(signature = (mesh, overlap, rotation_deg, noise_sigma = 0.33, partial_fraction = 0.5, seed = 0))]
fn py_generate_test_case(
    mesh: &PyPointCloud,
    overlap: f64,
    rotation_deg: f64,
    noise_sigma: f64,
    partial_fraction: f64,
    seed: u64,
) -> PyResult<PyTestCase> {
    let inner = generate_test_case(&mesh.inner, overlap, rotation_deg, noise_sigma, partial_fraction, seed).map_err(to_py)?;
    Ok(PyTestCase { inner })
}

#[pyclass(name = "CorrectionModel", module = "regkit", skip_from_py_object)]
pub struct PyCorrectionModel {
    inner: CorrectionModel,
}

#[pymethods]
impl PyCorrectionModel {
    #[getter]
    fn transform(&self) -> PyTransform {
        PyTransform { inner: self.inner.transform }
    }

    #[getter]
    fn residual_rms(&self) -> f64 {
        self.inner.residual_rms
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(to_py)
    }

    /// Applies the correction inside its region; a cloud is corrected at most once.
    fn apply(&self, scene: &PyPointCloud) -> PyResult<PyPointCloud> {
        Ok(PyPointCloud { inner: apply_region_correction(&scene.inner, &self.inner).map_err(to_py)? })
    }
}

/// Fits the rigid map taking scene points in the region onto their ground truth.
#[pyfunction]
#[pyo3(signature = (scene, ground_truth, center, radius = regkit::correction::DEFAULT_REGION_RADIUS))]
fn fit_correction(scene: &PyPointCloud, ground_truth: Vec<[f64; 3]>, center: [f64; 3], radius: f64) -> PyResult<PyCorrectionModel> {
    let region = RegionSpec::new(vec3(center), radius).map_err(to_py)?;
    let gt: Vec<Vec3> = ground_truth.into_iter().map(vec3).collect();
    let pairs = pair_ground_truth(&gt, &scene.inner, &region).map_err(to_py)?;
    Ok(PyCorrectionModel { inner: fit_region_correction(&pairs, &region).map_err(to_py)? })
}

#[pyclass(name = "Tracker", module = "regkit", skip_from_py_object)]
pub struct PyTracker {
    state: TrackerState,
}

#[pymethods]
impl PyTracker {
    #[new]
    #[pyo3(signature = (model, registration_pose, latency_ms = 0.0))]
    fn new(model: &PyPointCloud, registration_pose: &PyTransform, latency_ms: f64) -> PyResult<Self> {
        Ok(Self { state: tracker_init(model.inner.clone(), registration_pose.inner, latency_ms).map_err(to_py)? })
    }

    /// Tracks one frame; returns status, branch, pose (None when lost), rmse and compute time.
    fn track<'py>(&mut self, py: Python<'py>, scene: &PyPointCloud, timestamp_ms: f64) -> PyResult<Bound<'py, PyDict>> {
        let p = track_frame(&mut self.state, &Frame::new(scene.inner.clone(), timestamp_ms)).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("timestamp_ms", p.timestamp_ms)?;
        d.set_item("status", format!("{:?}", p.status).to_lowercase())?;
        d.set_item("branch", format!("{:?}", p.branch).to_lowercase())?;
        d.set_item("pose", p.pose.map(|inner| PyTransform { inner }))?;
        d.set_item("rmse_mm", p.rmse_mm)?;
        d.set_item("compute_ms", p.compute_ms)?;
        Ok(d)
    }
}

/// Pose at `t` between `a` (at `t_a`) and `b` (at `t_b`), clamped to the interval.
#[pyfunction(name = "interpolate_pose")]
fn py_interpolate_pose(a: &PyTransform, t_a: f64, b: &PyTransform, t_b: f64, t: f64) -> PyResult<PyTransform> {
    Ok(PyTransform { inner: interpolate_pose(&a.inner, t_a, &b.inner, t_b, t).map_err(to_py)? })
}

/// Composite scores from `(method, rmse_mm, runtime_ms)` triples.
#[pyfunction(name = "composite_score")]
fn py_composite_score(records: Vec<(String, f64, f64)>, lam: f64) -> PyResult<Vec<(String, f64)>> {
    let records: Vec<BenchmarkRecord> = records
        .into_iter()
        .map(|(method, rmse_mm, runtime_ms)| BenchmarkRecord {
            method,
            mesh_id: String::new(),
            overlap: 0.0,
            rotation_deg: 0.0,
            sigma: 0.0,
            partial: 0.0,
            seed: 0,
            rmse_mm,
            runtime_ms,
            success: true,
            error: None,
        })
        .collect();
    let table = composite_score(&records, lam).map_err(to_py)?;
    Ok(table.rows.into_iter().map(|r| (r.method, r.score)).collect())
}

#[pymodule]
#[pyo3(name = "regkit")]
fn regkit_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("RegkitError", m.py().get_type::<RegkitError>())?;
    m.add_class::<PyTransform>()?;
    m.add_class::<PyPointCloud>()?;
    m.add_class::<PyTestCase>()?;
    m.add_class::<PyCorrectionModel>()?;
    m.add_class::<PyTracker>()?;
    m.add_function(wrap_pyfunction!(kabsch, m)?)?;
    m.add_function(wrap_pyfunction!(py_register, m)?)?;
    m.add_function(wrap_pyfunction!(py_icp_refine, m)?)?;
    m.add_function(wrap_pyfunction!(py_icp_fast, m)?)?;
    m.add_function(wrap_pyfunction!(py_generate_test_case, m)?)?;
    m.add_function(wrap_pyfunction!(fit_correction, m)?)?;
    m.add_function(wrap_pyfunction!(py_interpolate_pose, m)?)?;
    m.add_function(wrap_pyfunction!(py_composite_score, m)?)?;
    Ok(())
}
