//! PLY reader (ASCII and binary little-endian) and ASCII writer.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().expect("8 bytes")),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

struct Header {
    format: Format,
    elements: Vec<Element>,
    body_offset: usize,
}

fn parse_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), message: message.into() }
}

fn parse_header(path: &Path, bytes: &[u8]) -> Result<Header> {
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    let mut pos = 0usize;
    let mut first = true;
    loop {
        let rest = &bytes[pos..];
        let end = rest.iter().position(|&b| b == b'\n').ok_or_else(|| parse_err(path, "unterminated header"))?;
        let line = std::str::from_utf8(&rest[..end]).map_err(|_| parse_err(path, "header is not UTF-8"))?.trim_end_matches('\r').trim();
        pos += end + 1;
        if first {
            if line != "ply" {
                return Err(parse_err(path, "missing 'ply' magic"));
            }
            first = false;
            continue;
        }
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("format") => {
                format = Some(match tok.next() {
                    Some("ascii") => Format::Ascii,
                    Some("binary_little_endian") => Format::BinaryLittleEndian,
                    other => return Err(parse_err(path, format!("unsupported format {other:?}"))),
                });
            }
            Some("element") => {
                let name = tok.next().ok_or_else(|| parse_err(path, "element without name"))?.to_string();
                let count =
                    tok.next().and_then(|c| c.parse().ok()).ok_or_else(|| parse_err(path, format!("bad count for element {name}")))?;
                elements.push(Element { name, count, properties: Vec::new() });
            }
            Some("property") => {
                let element = elements.last_mut().ok_or_else(|| parse_err(path, "property before element"))?;
                let ty = tok.next().ok_or_else(|| parse_err(path, "property without type"))?;
                if ty == "list" {
                    let count = tok.next().and_then(Scalar::parse).ok_or_else(|| parse_err(path, "bad list count type"))?;
                    let item = tok.next().and_then(Scalar::parse).ok_or_else(|| parse_err(path, "bad list item type"))?;
                    element.properties.push(Property::List { count, item });
                } else {
                    let ty = Scalar::parse(ty).ok_or_else(|| parse_err(path, format!("unknown type {ty}")))?;
                    let name = tok.next().ok_or_else(|| parse_err(path, "property without name"))?.to_string();
                    element.properties.push(Property::Scalar { name, ty });
                }
            }
            Some("end_header") => break,
            Some("comment") | Some("obj_info") | None => {}
            Some(other) => return Err(parse_err(path, format!("unexpected header keyword {other}"))),
        }
    }
    let format = format.ok_or_else(|| parse_err(path, "missing format line"))?;
    Ok(Header { format, elements, body_offset: pos })
}

struct VertexLayout {
    xyz: [usize; 3],
    normal: Option<[usize; 3]>,
    curvature: Option<usize>,
}

fn vertex_layout(path: &Path, element: &Element) -> Result<VertexLayout> {
    let find = |n: &str| element.properties.iter().position(|p| matches!(p, Property::Scalar { name, .. } if name == n));
    let xyz = match (find("x"), find("y"), find("z")) {
        (Some(x), Some(y), Some(z)) => [x, y, z],
        _ => return Err(parse_err(path, "vertex element lacks x, y, z")),
    };
    let normal = match (find("nx"), find("ny"), find("nz")) {
        (Some(x), Some(y), Some(z)) => Some([x, y, z]),
        _ => None,
    };
    Ok(VertexLayout { xyz, normal, curvature: find("curvature") })
}

/// Reads a PLY file into a point cloud. Only the `vertex` element is kept.
pub fn read_ply(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    parse_ply(path, &bytes)
}

pub(crate) fn parse_ply(path: &Path, bytes: &[u8]) -> Result<PointCloud> {
    let header = parse_header(path, bytes)?;
    let body = &bytes[header.body_offset..];
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut layout = None;
    match header.format {
        Format::Ascii => {
            let text = std::str::from_utf8(body).map_err(|_| parse_err(path, "ASCII body is not UTF-8"))?;
            let mut tokens = text.split_whitespace();
            let mut next = |what: &str| -> Result<f64> {
                tokens
                    .next()
                    .ok_or_else(|| parse_err(path, format!("unexpected end of data reading {what}")))?
                    .parse::<f64>()
                    .map_err(|e| parse_err(path, format!("bad number in {what}: {e}")))
            };
            for element in &header.elements {
                let is_vertex = element.name == "vertex";
                if is_vertex {
                    layout = Some(vertex_layout(path, element)?);
                }
                for _ in 0..element.count {
                    let mut row = Vec::new();
                    for prop in &element.properties {
                        match prop {
                            Property::Scalar { .. } => row.push(next(&element.name)?),
                            Property::List { .. } => {
                                let n = next(&element.name)?;
                                if n < 0.0 || n.fract() != 0.0 {
                                    return Err(parse_err(path, "bad list length"));
                                }
                                for _ in 0..n as usize {
                                    next(&element.name)?;
                                }
                                row.push(f64::NAN);
                            }
                        }
                    }
                    if is_vertex {
                        rows.push(row);
                    }
                }
                if is_vertex {
                    break;
                }
            }
        }
        Format::BinaryLittleEndian => {
            let mut pos = 0usize;
            let take = |pos: &mut usize, n: usize, what: &str| -> Result<std::ops::Range<usize>> {
                if *pos + n > body.len() {
                    return Err(parse_err(path, format!("truncated binary data in {what}")));
                }
                let r = *pos..*pos + n;
                *pos += n;
                Ok(r)
            };
            for element in &header.elements {
                let is_vertex = element.name == "vertex";
                if is_vertex {
                    layout = Some(vertex_layout(path, element)?);
                }
                for _ in 0..element.count {
                    let mut row = Vec::new();
                    for prop in &element.properties {
                        match *prop {
                            Property::Scalar { ty, .. } => {
                                let r = take(&mut pos, ty.size(), &element.name)?;
                                row.push(ty.read_le(&body[r]));
                            }
                            Property::List { count, item } => {
                                let r = take(&mut pos, count.size(), &element.name)?;
                                let n = count.read_le(&body[r]);
                                if n < 0.0 {
                                    return Err(parse_err(path, "negative list length"));
                                }
                                take(&mut pos, n as usize * item.size(), &element.name)?;
                                row.push(f64::NAN);
                            }
                        }
                    }
                    if is_vertex {
                        rows.push(row);
                    }
                }
                if is_vertex {
                    break;
                }
            }
        }
    }
    let layout = layout.ok_or_else(|| parse_err(path, "no vertex element"))?;
    if rows.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let pick = |row: &[f64], idx: [usize; 3]| Vec3::new(row[idx[0]], row[idx[1]], row[idx[2]]);
    let points: Vec<Vec3> = rows.iter().map(|r| pick(r, layout.xyz)).collect();
    if points.iter().any(|p| !p.iter().all(|v| v.is_finite())) {
        return Err(parse_err(path, "non-finite vertex coordinate"));
    }
    let mut cloud = PointCloud::new(points).with_id(path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default());
    if let Some(idx) = layout.normal {
        let normals = rows
            .iter()
            .map(|r| {
                let n = pick(r, idx);
                n.try_normalize(1e-12).unwrap_or_else(Vec3::zeros)
            })
            .collect();
        cloud = cloud.with_normals(normals);
    }
    if let Some(ci) = layout.curvature {
        cloud = cloud.with_curvatures(rows.iter().map(|r| r[ci].max(0.0)).collect());
    }
    Ok(cloud)
}

/// Writes `cloud` as ASCII PLY with double-precision `x y z [nx ny nz] [curvature]`.
pub fn write_ply_ascii(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    let mut out = Vec::with_capacity(cloud.len() * 64);
    write_ply_ascii_to(&mut out, cloud)?;
    fs::write(path, out)?;
    Ok(())
}

pub fn write_ply_ascii_to<W: Write>(w: &mut W, cloud: &PointCloud) -> Result<()> {
    writeln!(w, "ply\nformat ascii 1.0")?;
    if !cloud.id.is_empty() {
        writeln!(w, "comment id {}", cloud.id)?;
    }
    writeln!(w, "element vertex {}", cloud.len())?;
    writeln!(w, "property double x\nproperty double y\nproperty double z")?;
    if cloud.normals.is_some() {
        writeln!(w, "property double nx\nproperty double ny\nproperty double nz")?;
    }
    if cloud.curvatures.is_some() {
        writeln!(w, "property double curvature")?;
    }
    writeln!(w, "end_header")?;
    for i in 0..cloud.len() {
        let p = cloud.points[i];
        write!(w, "{} {} {}", p.x, p.y, p.z)?;
        if let Some(n) = &cloud.normals {
            write!(w, " {} {} {}", n[i].x, n[i].y, n[i].z)?;
        }
        if let Some(c) = &cloud.curvatures {
            write!(w, " {}", c[i])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Writes `cloud` as binary little-endian PLY with float64 properties.
pub fn write_ply_binary(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    let mut out = Vec::with_capacity(cloud.len() * 56 + 256);
    writeln!(out, "ply\nformat binary_little_endian 1.0\nelement vertex {}", cloud.len())?;
    writeln!(out, "property double x\nproperty double y\nproperty double z")?;
    if cloud.normals.is_some() {
        writeln!(out, "property double nx\nproperty double ny\nproperty double nz")?;
    }
    writeln!(out, "end_header")?;
    for i in 0..cloud.len() {
        for v in cloud.points[i].iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        if let Some(n) = &cloud.normals {
            for v in n[i].iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    fs::write(path, out)?;
    Ok(())
}
