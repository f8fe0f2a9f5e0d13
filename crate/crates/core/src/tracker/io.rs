use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Frame, TrackStatus, TrackedPose};
use crate::error::{Error, Result};
use crate::io::load_any;

pub const INDEX_FILE: &str = "frames.index";

#[derive(Debug, Clone, PartialEq)]
pub struct FrameIndexEntry {
    pub path: PathBuf,
    pub timestamp_ms: f64,
}

/// Parses `DIR/frames.index`: one `filename timestamp_ms` pair per line.
/// Blank lines and lines starting with `#` are skipped.
pub fn read_frame_index(dir: impl AsRef<Path>) -> Result<Vec<FrameIndexEntry>> {
    let dir = dir.as_ref();
    let path = dir.join(INDEX_FILE);
    let text = fs::read_to_string(&path)?;
    let parse_err = |line: usize, message: String| Error::Parse { path: path.clone(), message: format!("line {line}: {message}") };
    let mut entries: Vec<FrameIndexEntry> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(name), Some(ts), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(parse_err(n + 1, format!("expected `filename timestamp_ms`, got {line:?}")));
        };
        let timestamp_ms: f64 = ts.parse().map_err(|_| parse_err(n + 1, format!("bad timestamp {ts:?}")))?;
        if !timestamp_ms.is_finite() {
            return Err(parse_err(n + 1, format!("bad timestamp {ts:?}")));
        }
        if let Some(prev) = entries.last() {
            if !(timestamp_ms > prev.timestamp_ms) {
                return Err(parse_err(n + 1, format!("timestamp {timestamp_ms} does not increase")));
            }
        }
        entries.push(FrameIndexEntry { path: dir.join(name), timestamp_ms });
    }
    Ok(entries)
}

/// Loads frames lazily in index order.
pub struct FrameStream {
    entries: std::vec::IntoIter<FrameIndexEntry>,
}

impl FrameStream {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        Ok(Self { entries: read_frame_index(dir)?.into_iter() })
    }
}

impl Iterator for FrameStream {
    type Item = Result<Frame>;

    fn next(&mut self) -> Option<Self::Item> {
        let e = self.entries.next()?;
        Some(load_any(&e.path).map(|cloud| Frame::new(cloud, e.timestamp_ms)))
    }
}

/// One line of the JSON-lines pose stream; lost frames carry null pose fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseLine {
    pub timestamp_ms: f64,
    pub status: TrackStatus,
    pub rotation_row_major_9: Option<[f64; 9]>,
    pub translation_mm_3: Option<[f64; 3]>,
    pub rmse_mm: Option<f64>,
    pub compute_ms: f64,
}

impl From<&TrackedPose> for PoseLine {
    fn from(p: &TrackedPose) -> Self {
        Self {
            timestamp_ms: p.timestamp_ms,
            status: p.status,
            rotation_row_major_9: p.pose.map(|t| t.rotation_row_major()),
            translation_mm_3: p.pose.map(|t| [t.translation.x, t.translation.y, t.translation.z]),
            rmse_mm: p.rmse_mm,
            compute_ms: p.compute_ms,
        }
    }
}

pub fn write_pose_lines<W: Write>(mut w: W, poses: &[TrackedPose]) -> Result<()> {
    for p in poses {
        serde_json::to_writer(&mut w, &PoseLine::from(p))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{PointCloud, RigidTransform, Vec3};
    use crate::io::write_ply_ascii;
    use crate::tracker::{CascadeFlags, InitBranch};

    #[test]
    fn index_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cloud = PointCloud::new(vec![Vec3::new(1.0, 2.0, 3.0)]);
        write_ply_ascii(dir.path().join("frame_000001.ply"), &cloud).unwrap();
        write_ply_ascii(dir.path().join("frame_000002.ply"), &cloud).unwrap();
        fs::write(dir.path().join(INDEX_FILE), "# frames\nframe_000001.ply 16670\n\nframe_000002.ply 16703\n").unwrap();
        let frames: Vec<Frame> = FrameStream::open(dir.path()).unwrap().collect::<Result<_>>().unwrap();
        assert_eq!(frames.len(), 2);
        assert_eq!(frames[1].timestamp_ms, 16703.0);
        assert_eq!(frames[0].cloud.points, cloud.points);
    }

    #[test]
    fn index_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(INDEX_FILE), "a.ply 10\nb.ply 5\n").unwrap();
        let msg = read_frame_index(dir.path()).unwrap_err().to_string();
        assert!(msg.contains("line 2"), "{msg}");
        fs::write(dir.path().join(INDEX_FILE), "a.ply\n").unwrap();
        assert!(read_frame_index(dir.path()).unwrap_err().to_string().contains("line 1"));
    }

    #[test]
    fn pose_lines() {
        let flags = CascadeFlags { previous_succeeded: false, history_success: false, has_registration: false };
        let lost = TrackedPose {
            timestamp_ms: 5.0,
            pose: None,
            status: TrackStatus::Lost,
            branch: InitBranch::None,
            flags,
            init_pose: None,
            rmse_mm: None,
            compute_ms: 0.5,
        };
        let ok = TrackedPose {
            pose: Some(RigidTransform::from_translation(Vec3::new(1.0, 0.0, 0.0))),
            status: TrackStatus::Tracked,
            ..lost.clone()
        };
        let mut buf = Vec::new();
        write_pose_lines(&mut buf, &[lost, ok]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines[0]["status"], "lost");
        assert!(lines[0]["translation_mm_3"].is_null());
        assert_eq!(lines[1]["translation_mm_3"][0], 1.0);
        assert_eq!(lines[1]["rotation_row_major_9"][0], 1.0);
    }
}
