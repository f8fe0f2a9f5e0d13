//! Keypoint sampling, FPFH descriptors and descriptor matching.

mod fpfh;
mod matching;
mod sampling;

pub use fpfh::{compute_fpfh, descriptor_distance, DescriptorSet, Histogram, BINS_PER_FEATURE, DESCRIPTOR_LEN};
pub use matching::{default_tau, match_descriptors, CorrespondenceSet, MatchOptions};
pub use sampling::curvature_weighted_sample;
