//! Point-cloud and ground-truth file formats.

mod obj;
mod ply;

use std::path::Path;

pub use obj::read_obj;
pub use ply::{read_ply, write_ply_ascii, write_ply_ascii_to, write_ply_binary};

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, Vec3};

/// Supported point-cloud file formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    PlyAscii,
    PlyBinaryLe,
    Obj,
}

/// Loads a point cloud. PLY encodings are detected from the header either way.
pub fn load_point_cloud(path: impl AsRef<Path>, format: CloudFormat) -> Result<PointCloud> {
    match format {
        CloudFormat::PlyAscii | CloudFormat::PlyBinaryLe => read_ply(path),
        CloudFormat::Obj => read_obj(path),
    }
}

/// Loads a cloud choosing the reader from the file extension.
pub fn load_any(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("ply") => read_ply(path),
        Some("obj") => read_obj(path),
        other => Err(Error::InvalidArgument(format!("unknown point-cloud extension {other:?} for {}", path.display()))),
    }
}

/// Reads `x_mm, y_mm, z_mm` rows; a non-numeric first row is treated as a header.
pub fn read_points_csv(path: impl AsRef<Path>) -> Result<Vec<Vec3>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).flexible(true).from_path(path)?;
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: Option<Vec<f64>> = record.iter().take(3).map(|f| f.parse().ok()).collect();
        match parsed {
            Some(v) if v.len() == 3 => out.push(Vec3::new(v[0], v[1], v[2])),
            _ if i == 0 => continue,
            _ => {
                return Err(Error::Parse { path: path.to_path_buf(), message: format!("row {}: expected x,y,z", i + 1) });
            }
        }
    }
    Ok(out)
}

/// Ground-truth points from CSV or PLY, by extension.
pub fn read_reference_points(path: impl AsRef<Path>) -> Result<Vec<Vec3>> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("ply") => Ok(read_ply(path)?.points),
        _ => read_points_csv(path),
    }
}
