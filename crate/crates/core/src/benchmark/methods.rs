use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::coarse::{coarse_register, CoarseConfig};
use crate::error::{Error, Result};
use crate::geometry::{estimate_normals, NormalOrientation, PointCloud, RigidTransform};
use crate::icp::{icp_fast, icp_refine, IcpConfig};
use crate::register::{register, RegistrationConfig};

/// A registration algorithm under evaluation: maps `source` onto `target`.
///
/// Implementations may panic or fail; the harness records either as a
/// failed case.
pub trait RegistrationMethod {
    fn name(&self) -> &str;
    fn register(&self, source: &PointCloud, target: &PointCloud, seed: u64) -> Result<RigidTransform>;
}

/// Adapts a closure into a [`RegistrationMethod`].
pub struct FnMethod<F> {
    name: String,
    f: F,
}

impl<F> FnMethod<F>
where
    F: Fn(&PointCloud, &PointCloud, u64) -> Result<RigidTransform>,
{
    pub fn new(name: impl Into<String>, f: F) -> Self {
        Self { name: name.into(), f }
    }
}

impl<F> RegistrationMethod for FnMethod<F>
where
    F: Fn(&PointCloud, &PointCloud, u64) -> Result<RigidTransform>,
{
    fn name(&self) -> &str {
        &self.name
    }

    fn register(&self, source: &PointCloud, target: &PointCloud, seed: u64) -> Result<RigidTransform> {
        (self.f)(source, target, seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinKind {
    /// Coarse alignment refined by robust point-to-plane ICP.
    Pipeline,
    Coarse,
    FastIcp,
    RobustIcp,
    Identity,
}

impl BuiltinKind {
    pub const ALL: [BuiltinKind; 5] = [Self::Pipeline, Self::Coarse, Self::FastIcp, Self::RobustIcp, Self::Identity];

    pub fn id(&self) -> &'static str {
        match self {
            Self::Pipeline => "pipeline",
            Self::Coarse => "coarse",
            Self::FastIcp => "fast_icp",
            Self::RobustIcp => "robust_icp",
            Self::Identity => "identity",
        }
    }
}

impl fmt::Display for BuiltinKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for BuiltinKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.id() == s).ok_or_else(|| {
            Error::InvalidArgument(format!("unknown method '{s}' (known: pipeline, coarse, fast_icp, robust_icp, identity)"))
        })
    }
}

/// The toolkit's own methods. ICP-only methods start from the identity.
#[derive(Debug, Clone)]
pub struct Builtin {
    pub kind: BuiltinKind,
    pub coarse: CoarseConfig,
    pub icp: IcpConfig,
    pub fast: IcpConfig,
}

impl Builtin {
    pub fn new(kind: BuiltinKind) -> Self {
        Self { kind, coarse: CoarseConfig::default(), icp: IcpConfig::default(), fast: IcpConfig::fast() }
    }
}

impl RegistrationMethod for Builtin {
    fn name(&self) -> &str {
        self.kind.id()
    }

    fn register(&self, source: &PointCloud, target: &PointCloud, seed: u64) -> Result<RigidTransform> {
        let id = RigidTransform::identity();
        match self.kind {
            BuiltinKind::Pipeline => {
                let config = RegistrationConfig { coarse: self.coarse.clone(), icp: self.icp.clone(), seed };
                Ok(register(source, target, &config)?.transform)
            }
            BuiltinKind::Coarse => Ok(coarse_register(source, target, &self.coarse, seed)?.transform),
            BuiltinKind::FastIcp => Ok(icp_fast(source, target, &id, &self.fast)?.transform),
            BuiltinKind::RobustIcp => {
                let tgt = match target.normals {
                    Some(_) => target.clone(),
                    None => estimate_normals(target, self.coarse.normal_k, NormalOrientation::AwayFromCentroid)?,
                };
                Ok(icp_refine(source, &tgt, &id, &self.icp)?.transform)
            }
            BuiltinKind::Identity => Ok(id),
        }
    }
}
