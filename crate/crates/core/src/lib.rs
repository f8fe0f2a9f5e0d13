//! Rigid registration and 6-DoF tracking for noisy, partial depth-sensor point clouds.
//!
//! The pipeline runs region-specific sensor-error correction, outlier-robust
//! coarse alignment from curvature-weighted FPFH correspondences, robust ICP
//! refinement, and a stateful frame-to-frame tracker. A benchmark harness
//! generates synthetic cases and scores methods on accuracy and runtime.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmark;
pub mod coarse;
pub mod correction;
pub mod error;
pub mod features;
pub mod geometry;
pub mod icp;
pub mod io;
pub mod register;
pub mod tracker;

pub(crate) use error::config_error;
pub use error::{Error, Result};
pub use geometry::{PointCloud, RigidTransform, Vec3};
