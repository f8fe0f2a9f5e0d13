use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, Vec3};

/// Reads the `v` lines of a Wavefront OBJ file; faces and everything else are ignored.
pub fn read_obj(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_obj(path, &text)
}

pub(crate) fn parse_obj(path: &Path, text: &str) -> Result<PointCloud> {
    let mut points = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let mut tok = line.split_whitespace();
        if tok.next() != Some("v") {
            continue;
        }
        let mut coord = [0.0; 3];
        for c in &mut coord {
            *c = tok
                .next()
                .and_then(|t| t.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse { path: path.to_path_buf(), message: format!("line {}: malformed vertex", lineno + 1) })?;
        }
        points.push(Vec3::from(coord));
    }
    if points.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(PointCloud::new(points).with_id(path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()))
}
