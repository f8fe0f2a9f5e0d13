//! Frame-to-frame 6-DoF tracking with a fallback pose-initialization cascade.

mod io;

use std::collections::VecDeque;
use std::time::Instant;

use nalgebra::UnitQuaternion;
use serde::{Deserialize, Serialize};

pub use io::{read_frame_index, write_pose_lines, FrameIndexEntry, FrameStream, PoseLine};

use crate::error::{Error, Result};
use crate::geometry::{NeighborIndex, PointCloud, RigidTransform};
use crate::icp::{crop_aabb, IcpConfig, IcpResult};

pub const HISTORY_DEPTH: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub cloud: PointCloud,
    pub timestamp_ms: f64,
}

impl Frame {
    pub fn new(cloud: PointCloud, timestamp_ms: f64) -> Self {
        Self { cloud, timestamp_ms }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackStatus {
    Tracked,
    Recovered,
    Reinitialized,
    Lost,
}

/// Which pose seeded the solver for a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitBranch {
    /// The previous frame's pose; it succeeded.
    Previous,
    /// The newest successful pose still in the history.
    History,
    /// The registration pose.
    Registration,
    /// Nothing to start from.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    pub icp: IcpConfig,
    /// Growth (mm) of the model's bounding box when cropping the scene.
    pub crop_margin: f64,
    pub history_depth: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            icp: IcpConfig {
                max_distance: 20.0,
                max_iterations: 100,
                rotation_tolerance_deg: 1e-2,
                translation_tolerance_mm: 1e-2,
                ..IcpConfig::fast()
            },
            crop_margin: 20.0,
            history_depth: HISTORY_DEPTH,
        }
    }
}

impl TrackerConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| crate::config_error(text, &e))?;
        config.icp.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryEntry {
    pub timestamp_ms: f64,
    pub pose: Option<RigidTransform>,
    pub success: bool,
}

/// Flags the cascade reads, recorded before the branch is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CascadeFlags {
    pub previous_succeeded: bool,
    pub history_success: bool,
    pub has_registration: bool,
}

impl CascadeFlags {
    /// The four-way case expression over the flags.
    pub fn branch(&self) -> InitBranch {
        if self.previous_succeeded {
            InitBranch::Previous
        } else if self.history_success {
            InitBranch::History
        } else if self.has_registration {
            InitBranch::Registration
        } else {
            InitBranch::None
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrackerState {
    pub model: PointCloud,
    /// Newest successful pose and its timestamp.
    pub last_pose: Option<(RigidTransform, f64)>,
    /// Pose from global registration and its latency (ms).
    pub registration_pose: Option<(RigidTransform, f64)>,
    pub history: VecDeque<HistoryEntry>,
    pub config: TrackerConfig,
}

/// Tracker output for one frame. `pose` is `None` exactly when the status is lost.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackedPose {
    pub timestamp_ms: f64,
    pub pose: Option<RigidTransform>,
    pub status: TrackStatus,
    pub branch: InitBranch,
    pub flags: CascadeFlags,
    pub init_pose: Option<RigidTransform>,
    pub rmse_mm: Option<f64>,
    pub compute_ms: f64,
}

/// Starts tracking `model` from a registration result obtained `latency_ms` ago.
pub fn tracker_init(model: PointCloud, registration_pose: RigidTransform, latency_ms: f64) -> Result<TrackerState> {
    let mut state = TrackerState::without_registration(model)?;
    state.set_registration(registration_pose, latency_ms)?;
    Ok(state)
}

impl TrackerState {
    pub fn without_registration(model: PointCloud) -> Result<Self> {
        model.ensure_non_empty()?;
        Ok(Self { model, last_pose: None, registration_pose: None, history: VecDeque::new(), config: TrackerConfig::default() })
    }

    pub fn with_config(mut self, config: TrackerConfig) -> Result<Self> {
        config.icp.validate()?;
        if !(config.crop_margin >= 0.0) || config.history_depth == 0 {
            return Err(Error::InvalidArgument("crop margin must be non-negative and history depth positive".into()));
        }
        self.config = config;
        Ok(self)
    }

    pub fn set_registration(&mut self, pose: RigidTransform, latency_ms: f64) -> Result<()> {
        if !pose.is_valid(1e-6) || (pose.scale - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument("registration pose is not a rigid motion".into()));
        }
        if !(latency_ms >= 0.0) {
            return Err(Error::InvalidArgument(format!("latency must be non-negative, got {latency_ms}")));
        }
        self.registration_pose = Some((pose, latency_ms));
        Ok(())
    }

    pub fn flags(&self) -> CascadeFlags {
        CascadeFlags {
            previous_succeeded: self.history.back().is_some_and(|h| h.success),
            history_success: self.history.iter().any(|h| h.success),
            has_registration: self.registration_pose.is_some(),
        }
    }

    fn init_pose(&self, branch: InitBranch) -> Option<RigidTransform> {
        match branch {
            InitBranch::Previous => self.history.back().and_then(|h| h.pose),
            InitBranch::History => self.history.iter().rev().find(|h| h.success).and_then(|h| h.pose),
            InitBranch::Registration => self.registration_pose.map(|(p, _)| p),
            InitBranch::None => None,
        }
    }

    fn push(&mut self, entry: HistoryEntry) {
        if entry.success {
            self.last_pose = entry.pose.map(|p| (p, entry.timestamp_ms));
        }
        self.history.push_back(entry);
        while self.history.len() > self.config.history_depth {
            self.history.pop_front();
        }
    }

    fn solve(&self, scene: &PointCloud, init: &RigidTransform, start: Instant) -> Option<IcpResult> {
        let crop = match crop_aabb(scene, &self.model, init, self.config.crop_margin) {
            Ok(c) => c,
            Err(e) => {
                log::debug!("tracking failed: {e}");
                return None;
            }
        };
        let index = NeighborIndex::new(&crop.points);
        match crate::icp::fit_prepared(&self.model.points, &crop.points, &index, init, &self.config.icp, start) {
            Ok(r) => Some(r),
            Err(e) => {
                log::debug!("tracking failed: {e}");
                None
            }
        }
    }
}

/// Estimates the model pose in `frame`, seeding the solver from the cascade.
///
/// A failed solve reports `Lost` with no pose. Successful frames report
/// `Tracked` when seeded by the previous frame or on the first frame after
/// initialization, `Recovered` when seeded from older history and
/// `Reinitialized` when the registration pose had to be used again.
pub fn track_frame(state: &mut TrackerState, frame: &Frame) -> Result<TrackedPose> {
    if let Some(last) = state.history.back() {
        if !(frame.timestamp_ms > last.timestamp_ms) {
            return Err(Error::StaleFrame { timestamp_ms: frame.timestamp_ms, last_ms: last.timestamp_ms });
        }
    }
    let start = Instant::now();
    let flags = state.flags();
    let branch = flags.branch();
    let init_pose = state.init_pose(branch);
    let result = init_pose.and_then(|init| state.solve(&frame.cloud, &init, start)).filter(|r| r.success);
    let compute_ms = start.elapsed().as_secs_f64() * 1e3;

    let (pose, rmse_mm, status) = match &result {
        Some(r) => {
            let status = match branch {
                InitBranch::Previous => TrackStatus::Tracked,
                InitBranch::History => TrackStatus::Recovered,
                InitBranch::Registration if state.history.is_empty() => TrackStatus::Tracked,
                InitBranch::Registration => TrackStatus::Reinitialized,
                InitBranch::None => unreachable!("no solve without an initial pose"),
            };
            (Some(r.transform), r.inlier_rmse, status)
        }
        None => (None, None, TrackStatus::Lost),
    };
    state.push(HistoryEntry { timestamp_ms: frame.timestamp_ms, pose, success: pose.is_some() });
    Ok(TrackedPose { timestamp_ms: frame.timestamp_ms, pose, status, branch, flags, init_pose, rmse_mm, compute_ms })
}

/// Pose at time `t`, interpolated between `a` at `t_a` and `b` at `t_b`.
///
/// Translation is linear and rotation follows the shorter great-circle arc.
/// Times outside `[t_a, t_b]` are clamped to the nearer endpoint.
pub fn interpolate_pose(a: &RigidTransform, t_a: f64, b: &RigidTransform, t_b: f64, t: f64) -> Result<RigidTransform> {
    if !(t_a < t_b) {
        return Err(Error::InvalidArgument(format!("interpolation needs t_a < t_b, got {t_a} and {t_b}")));
    }
    if a == b || t <= t_a {
        return Ok(*a);
    }
    if t >= t_b {
        return Ok(*b);
    }
    let s = (t - t_a) / (t_b - t_a);
    let qa = a.quaternion();
    let mut qb = b.quaternion();
    if qa.coords.dot(&qb.coords) < 0.0 {
        qb = UnitQuaternion::new_unchecked(-qb.into_inner());
    }
    let q = qa.slerp(&qb, s);
    let translation = a.translation + (b.translation - a.translation) * s;
    Ok(RigidTransform::from_quaternion(&q, translation))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingReport {
    pub per_frame_ms: Vec<f64>,
    pub median_ms: Option<f64>,
}

/// Tracks every frame in order.
pub fn replay_sequence<I>(state: &mut TrackerState, frames: I) -> Result<(Vec<TrackedPose>, TimingReport)>
where
    I: IntoIterator<Item = Result<Frame>>,
{
    let mut poses = Vec::new();
    for frame in frames {
        poses.push(track_frame(state, &frame?)?);
    }
    let per_frame_ms: Vec<f64> = poses.iter().map(|p| p.compute_ms).collect();
    let median_ms = crate::icp::median(per_frame_ms.iter().copied());
    Ok((poses, TimingReport { per_frame_ms, median_ms }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmark::Surrogate;
    use crate::geometry::{voxel_downsample, Vec3};

    fn model() -> PointCloud {
        voxel_downsample(&Surrogate::RidgedEllipsoid.generate(20_000), 2000)
    }

    fn frame(scene: &PointCloud, pose: &RigidTransform, t: f64) -> Frame {
        Frame::new(scene.transformed(pose), t)
    }

    #[test]
    fn init_has_no_last_pose() {
        let s = tracker_init(model(), RigidTransform::identity(), 0.0).unwrap();
        assert!(s.last_pose.is_none() && s.history.is_empty());
        assert_eq!(s.flags().branch(), InitBranch::Registration);
        assert!(tracker_init(PointCloud::default(), RigidTransform::identity(), 0.0).is_err());
    }

    #[test]
    fn static_scene_stays_tracked() {
        let m = model();
        let scene = Surrogate::RidgedEllipsoid.generate(20_000);
        let pose = RigidTransform::from_axis_angle(&Vec3::z(), 0.1, Vec3::new(5.0, 0.0, 0.0));
        let mut s = tracker_init(m, pose, 0.0).unwrap();
        let mut prev: Option<RigidTransform> = None;
        for k in 0..10 {
            let p = track_frame(&mut s, &frame(&scene, &pose, k as f64 * 33.0)).unwrap();
            assert_eq!(p.status, TrackStatus::Tracked, "frame {k}");
            let est = p.pose.unwrap();
            if let Some(q) = prev {
                assert!(est.translation_distance_to(&q) < 0.1);
            }
            prev = Some(est);
        }
        assert_eq!(s.last_pose.unwrap().1, 297.0);
    }

    #[test]
    fn fresh_state_is_lost() {
        let mut s = TrackerState::without_registration(model()).unwrap();
        let p = track_frame(&mut s, &Frame::new(model(), 0.0)).unwrap();
        assert_eq!((p.status, p.branch, p.pose), (TrackStatus::Lost, InitBranch::None, None));
    }

    #[test]
    fn stale_frames_are_rejected() {
        let mut s = tracker_init(model(), RigidTransform::identity(), 0.0).unwrap();
        track_frame(&mut s, &Frame::new(model(), 10.0)).unwrap();
        let err = track_frame(&mut s, &Frame::new(model(), 10.0)).unwrap_err();
        assert!(matches!(err, Error::StaleFrame { .. }));
    }

    #[test]
    fn occlusion_recovers_from_history() {
        let m = model();
        let scene = Surrogate::RidgedEllipsoid.generate(20_000);
        let id = RigidTransform::identity();
        let mut s = tracker_init(m, id, 0.0).unwrap();
        let mut statuses = Vec::new();
        for k in 0..8 {
            let cloud = if (3..5).contains(&k) { PointCloud::new(vec![Vec3::repeat(1e4)]) } else { scene.clone() };
            let p = track_frame(&mut s, &Frame::new(cloud, k as f64)).unwrap();
            statuses.push((p.status, p.branch));
        }
        use InitBranch as B;
        use TrackStatus as S;
        assert_eq!(
            statuses,
            vec![
                (S::Tracked, B::Registration),
                (S::Tracked, B::Previous),
                (S::Tracked, B::Previous),
                (S::Lost, B::Previous),
                (S::Lost, B::History),
                (S::Recovered, B::History),
                (S::Tracked, B::Previous),
                (S::Tracked, B::Previous),
            ]
        );
    }

    #[test]
    fn interpolation_cases() {
        let a = RigidTransform::identity();
        let b = RigidTransform::from_axis_angle(&Vec3::z(), std::f64::consts::FRAC_PI_2, Vec3::new(10.0, 0.0, 0.0));
        assert_eq!(interpolate_pose(&a, 0.0, &b, 1.0, 0.0).unwrap(), a);
        assert_eq!(interpolate_pose(&a, 0.0, &b, 1.0, 1.0).unwrap(), b);
        let mid = interpolate_pose(&a, 0.0, &b, 1.0, 0.5).unwrap();
        let expected = RigidTransform::from_axis_angle(&Vec3::z(), std::f64::consts::FRAC_PI_4, Vec3::zeros());
        assert!((mid.rotation - expected.rotation).abs().max() < 1e-9);
        let t = RigidTransform::from_translation(Vec3::new(10.0, 0.0, 0.0));
        let p = interpolate_pose(&a, 0.0, &t, 10.0, 3.0).unwrap();
        assert!((p.translation - Vec3::new(3.0, 0.0, 0.0)).norm() < 1e-12);
        assert_eq!(interpolate_pose(&a, 0.0, &b, 1.0, 7.0).unwrap(), b);
        assert!(interpolate_pose(&a, 1.0, &b, 1.0, 1.0).is_err());
    }

    #[test]
    fn interpolation_takes_the_short_arc() {
        let a = RigidTransform::from_axis_angle(&Vec3::z(), 3.0, Vec3::zeros());
        let b = RigidTransform::from_axis_angle(&Vec3::z(), -3.0, Vec3::zeros());
        let mid = interpolate_pose(&a, 0.0, &b, 1.0, 0.5).unwrap();
        assert!(mid.rotation_angle_to(&a) < 0.15 && mid.rotation_angle_to(&b) < 0.15);
    }

    #[test]
    fn empty_replay() {
        let mut s = tracker_init(model(), RigidTransform::identity(), 0.0).unwrap();
        let (poses, timing) = replay_sequence(&mut s, Vec::new()).unwrap();
        assert!(poses.is_empty() && timing.median_ms.is_none());
    }
}
