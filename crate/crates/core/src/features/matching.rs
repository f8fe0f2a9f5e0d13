use std::io::Write;
use std::path::Path;

use super::fpfh::{descriptor_distance, DescriptorSet};
use crate::error::{Error, Result};

/// Weighted putative correspondences between two clouds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorrespondenceSet {
    /// `(source index, target index)` into the parent clouds.
    pub pairs: Vec<(usize, usize)>,
    pub weights: Vec<f64>,
    /// Descriptor-space distance of each pair (zero for synthetic sets).
    pub distances: Vec<f64>,
}

impl CorrespondenceSet {
    /// Unit-weight correspondences.
    pub fn from_pairs(pairs: Vec<(usize, usize)>) -> Self {
        let n = pairs.len();
        Self { pairs, weights: vec![1.0; n], distances: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn subset(&self, keep: &[usize]) -> Self {
        Self {
            pairs: keep.iter().map(|&i| self.pairs[i]).collect(),
            weights: keep.iter().map(|&i| self.weights[i]).collect(),
            distances: keep.iter().map(|&i| self.distances[i]).collect(),
        }
    }

    /// Debug dump: `source_index,target_index,weight,descriptor_distance`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["source_index", "target_index", "weight", "descriptor_distance"])?;
        for ((&(s, t), wt), d) in self.pairs.iter().zip(&self.weights).zip(&self.distances) {
            w.write_record([s.to_string(), t.to_string(), wt.to_string(), d.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_to<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["source_index", "target_index", "weight", "descriptor_distance"])?;
        for ((&(s, t), wt), d) in self.pairs.iter().zip(&self.weights).zip(&self.distances) {
            w.write_record([s.to_string(), t.to_string(), wt.to_string(), d.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Descriptor matching options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchOptions {
    /// Require the pair to be each other's nearest neighbor.
    pub mutual: bool,
}

impl Default for MatchOptions {
    fn default() -> Self {
        Self { mutual: true }
    }
}

/// Default threshold: `factor` × the median, over live source descriptors, of
/// the distance to their nearest live target descriptor.
pub fn default_tau(source: &DescriptorSet, target: &DescriptorSet, factor: f64) -> Option<f64> {
    let live_t: Vec<usize> = (0..target.len()).filter(|&j| !target.isolated[j]).collect();
    if live_t.is_empty() {
        return None;
    }
    let mut nn: Vec<f64> = (0..source.len())
        .filter(|&i| !source.isolated[i])
        .map(|i| live_t.iter().map(|&j| descriptor_distance(&source.descriptors[i], &target.descriptors[j])).fold(f64::INFINITY, f64::min))
        .collect();
    if nn.is_empty() {
        return None;
    }
    nn.sort_by(f64::total_cmp);
    let median = nn[(nn.len() - 1) / 2];
    (median > 0.0).then_some(factor * median)
}

/// Nearest-neighbor matching in descriptor space with threshold `tau`.
///
/// Each kept pair gets weight `(1 − d/τ)·(1 + kᵢ/k̄)`, where `kᵢ` is the
/// curvature of the source point and `k̄` the mean over `source_curvatures`
/// (aligned with `source`'s entries). Isolated descriptors never match.
pub fn match_descriptors(
    source: &DescriptorSet,
    target: &DescriptorSet,
    tau: f64,
    source_curvatures: &[f64],
    options: MatchOptions,
) -> Result<CorrespondenceSet> {
    if source.is_empty() || target.is_empty() {
        return Err(Error::InvalidArgument("descriptor sets must be non-empty".into()));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
    }
    if source_curvatures.len() != source.len() {
        return Err(Error::InvalidArgument("one curvature per source descriptor required".into()));
    }
    let n = source.len();
    let m = target.len();
    let mut row_best = vec![(f64::INFINITY, usize::MAX); n];
    let mut col_best = vec![(f64::INFINITY, usize::MAX); m];
    for i in (0..n).filter(|&i| !source.isolated[i]) {
        for j in (0..m).filter(|&j| !target.isolated[j]) {
            let d = descriptor_distance(&source.descriptors[i], &target.descriptors[j]);
            if d < row_best[i].0 {
                row_best[i] = (d, j);
            }
            if d < col_best[j].0 {
                col_best[j] = (d, i);
            }
        }
    }
    let mean_curv = source_curvatures.iter().sum::<f64>() / n as f64;
    let mut out = CorrespondenceSet::default();
    for i in 0..n {
        let (d, j) = row_best[i];
        if j == usize::MAX || d >= tau || (options.mutual && col_best[j].1 != i) {
            continue;
        }
        let importance = if mean_curv > 0.0 { 1.0 + source_curvatures[i].max(0.0) / mean_curv } else { 1.0 };
        out.pairs.push((source.source_indices[i], target.source_indices[j]));
        out.weights.push((1.0 - d / tau) * importance);
        out.distances.push(d);
    }
    if out.is_empty() {
        return Err(Error::NoCorrespondences);
    }
    Ok(out)
}
