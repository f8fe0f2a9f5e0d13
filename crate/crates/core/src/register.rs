//! End-to-end registration: robust coarse alignment followed by robust ICP.

use serde::{Deserialize, Serialize};

use crate::coarse::{coarse_register, CoarseConfig, CoarseResult};
use crate::error::{Error, Result};
use crate::geometry::{estimate_normals_and_curvature, NormalOrientation, PointCloud, RigidTransform};
use crate::icp::{icp_refine, IcpConfig, IcpResult};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegistrationConfig {
    pub coarse: CoarseConfig,
    pub icp: IcpConfig,
    pub seed: u64,
}

impl RegistrationConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| crate::config_error(text, &e))?;
        config.coarse.validate()?;
        config.icp.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone)]
pub struct Registration {
    /// Maps source coordinates into the target frame.
    pub transform: RigidTransform,
    pub coarse: CoarseResult,
    pub refine: IcpResult,
}

impl Registration {
    pub fn success(&self) -> bool {
        self.refine.success
    }
}

fn with_geometry(cloud: &PointCloud, k: usize) -> Result<PointCloud> {
    if cloud.normals.is_some() && cloud.curvatures.is_some() {
        return Ok(cloud.clone());
    }
    estimate_normals_and_curvature(cloud, k, NormalOrientation::AwayFromCentroid)
}

/// Aligns `source` to `target` globally, then refines the result.
pub fn register(source: &PointCloud, target: &PointCloud, config: &RegistrationConfig) -> Result<Registration> {
    let k = config.coarse.normal_k;
    let src = with_geometry(source, k)?;
    let tgt = with_geometry(target, k)?;
    let coarse = coarse_register(&src, &tgt, &config.coarse, config.seed)?;
    let refine = match icp_refine(&src, &tgt, &coarse.transform, &config.icp) {
        Ok(r) => r,
        Err(e @ (Error::NoCorrespondencesInRange { .. } | Error::NonFiniteEnergy)) => {
            return Err(Error::RegistrationFailed(format!("refinement from the coarse pose failed: {e}")))
        }
        Err(e) => return Err(e),
    };
    Ok(Registration { transform: refine.transform, coarse, refine })
}
