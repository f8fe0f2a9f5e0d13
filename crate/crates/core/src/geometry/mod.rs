//! Point clouds, spatial indexing, local shape estimation and closed-form alignment.

mod cloud;
mod downsample;
mod kabsch;
mod kdtree;
mod metrics;
mod normals;
mod plane;
mod transform;

pub use cloud::{apply_transform, bounds, centroid, PointCloud, Vec3};
pub use downsample::{downsample_edge, voxel_downsample, voxel_grid};
pub use kabsch::{kabsch_align, kabsch_weighted, rotation_from_covariance};
pub use kdtree::NeighborIndex;
pub use metrics::{alignment_rmse, Pairing};
pub use normals::{estimate_curvature, estimate_normals, estimate_normals_and_curvature, local_shape, LocalShape, NormalOrientation};
pub use plane::{fit_plane_least_squares, project_onto_plane, Plane};
pub use transform::{exp_so3, log_so3, orthonormalize, rotation_angle_between, PoseRecord, RigidTransform};
