//! Point cloud and mesh files: XYZ, PLY (ascii and binary little-endian) and
//! OBJ.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use crate::error::{Error, ParseLocation, Result};
use crate::geometry::{DomainTransform, Point3, TriangleMesh, Vec3};
use crate::sampling::SampleSet;

/// Points read from a file. Normals are returned when present so callers can
/// report that they are being ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub normals: Option<Vec<Vec3>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Xyz,
    Ply,
    Obj,
}

fn format_of(path: &Path) -> Result<Format> {
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("xyz") | Some("txt") | Some("pts") => Ok(Format::Xyz),
        Some("ply") => Ok(Format::Ply),
        Some("obj") => Ok(Format::Obj),
        _ => Err(Error::UnknownFormat(path.to_path_buf())),
    }
}

fn parse_err(path: &Path, location: ParseLocation, message: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), location, message: message.into() }
}

pub fn read_points(path: &Path) -> Result<PointCloud> {
    let format = format_of(path)?;
    let bytes = fs::read(path)?;
    match format {
        Format::Xyz => read_xyz(path, &bytes),
        Format::Obj => read_obj(path, &bytes).map(|(points, _)| PointCloud { points, normals: None }),
        Format::Ply => {
            let ply = Ply::parse(path, &bytes)?;
            Ok(PointCloud { points: ply.points, normals: ply.normals })
        }
    }
}

/// Reads a triangle mesh from PLY or OBJ. Polygons are fan-triangulated.
pub fn read_mesh(path: &Path) -> Result<TriangleMesh> {
    let format = format_of(path)?;
    let bytes = fs::read(path)?;
    let (vertices, faces) = match format {
        Format::Obj => read_obj(path, &bytes)?,
        Format::Ply => {
            let ply = Ply::parse(path, &bytes)?;
            (ply.points, ply.faces)
        }
        Format::Xyz => return Err(Error::UnknownFormat(path.to_path_buf())),
    };
    TriangleMesh::new(vertices, faces)
}

fn text(path: &Path, bytes: &[u8]) -> Result<String> {
    String::from_utf8(bytes.to_vec()).map_err(|e| {
        parse_err(path, ParseLocation::Byte(e.utf8_error().valid_up_to() as u64), "invalid UTF-8")
    })
}

fn parse_coords<'a>(path: &Path, line: usize, mut tokens: impl Iterator<Item = &'a str>) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for tok in tokens.by_ref() {
        let v: f64 = tok
            .parse()
            .map_err(|_| parse_err(path, ParseLocation::Line(line), format!("not a number: {tok:?}")))?;
        if !v.is_finite() {
            return Err(parse_err(path, ParseLocation::Line(line), format!("non-finite value {tok}")));
        }
        out.push(v);
    }
    Ok(out)
}

fn read_xyz(path: &Path, bytes: &[u8]) -> Result<PointCloud> {
    let mut points = Vec::new();
    let mut normals = Vec::new();
    let mut all_normals = true;
    for (i, line) in text(path, bytes)?.lines().enumerate() {
        let line = line.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let v = parse_coords(path, i + 1, line.split_whitespace())?;
        if v.len() < 3 {
            return Err(parse_err(path, ParseLocation::Line(i + 1), format!("expected x y z, got {} values", v.len())));
        }
        points.push(Vec3::new(v[0], v[1], v[2]));
        if v.len() >= 6 {
            normals.push(Vec3::new(v[3], v[4], v[5]));
        } else {
            all_normals = false;
        }
    }
    let normals = (all_normals && !points.is_empty()).then_some(normals);
    Ok(PointCloud { points, normals })
}

fn read_obj(path: &Path, bytes: &[u8]) -> Result<(Vec<Point3>, Vec<[u32; 3]>)> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (i, line) in text(path, bytes)?.lines().enumerate() {
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let v = parse_coords(path, i + 1, tokens.take(3))?;
                if v.len() != 3 {
                    return Err(parse_err(path, ParseLocation::Line(i + 1), "vertex needs 3 coordinates"));
                }
                vertices.push(Vec3::new(v[0], v[1], v[2]));
            }
            Some("f") => {
                let mut idx = Vec::new();
                for tok in tokens {
                    let first = tok.split('/').next().unwrap();
                    let raw: i64 = first
                        .parse()
                        .map_err(|_| parse_err(path, ParseLocation::Line(i + 1), format!("bad face index {tok:?}")))?;
                    let resolved = if raw < 0 { vertices.len() as i64 + raw } else { raw - 1 };
                    if resolved < 0 || resolved > u32::MAX as i64 {
                        return Err(parse_err(path, ParseLocation::Line(i + 1), format!("face index {raw} out of range")));
                    }
                    idx.push(resolved as u32);
                }
                fan(&idx, &mut faces);
            }
            _ => {}
        }
    }
    Ok((vertices, faces))
}

fn fan(idx: &[u32], faces: &mut Vec<[u32; 3]>) {
    for w in 1..idx.len().saturating_sub(1) {
        faces.push([idx[0], idx[w], idx[w + 1]]);
    }
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
    fn from_name(name: &str) -> Option<Scalar> {
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

    fn decode(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

impl Property {
    fn name(&self) -> &str {
        match self {
            Property::Scalar(n, _) | Property::List(n, _, _) => n,
        }
    }
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

struct Ply {
    points: Vec<Point3>,
    normals: Option<Vec<Vec3>>,
    faces: Vec<[u32; 3]>,
}

/// Walks the body of a PLY file value by value.
enum Body<'a> {
    Ascii { tokens: std::iter::Peekable<Box<dyn Iterator<Item = (usize, &'a str)> + 'a>>, last_line: usize },
    Binary { bytes: &'a [u8], pos: usize, base: usize },
}

impl<'a> Body<'a> {
    fn next(&mut self, path: &Path, ty: Scalar) -> Result<f64> {
        match self {
            Body::Ascii { tokens, last_line } => {
                let (line, tok) = tokens
                    .next()
                    .ok_or_else(|| parse_err(path, ParseLocation::Line(*last_line), "unexpected end of data"))?;
                *last_line = line;
                let v: f64 = tok
                    .parse()
                    .map_err(|_| parse_err(path, ParseLocation::Line(line), format!("not a number: {tok:?}")))?;
                if !v.is_finite() {
                    return Err(parse_err(path, ParseLocation::Line(line), format!("non-finite value {tok}")));
                }
                Ok(v)
            }
            Body::Binary { bytes, pos, base } => {
                let n = ty.size();
                if *pos + n > bytes.len() {
                    return Err(parse_err(path, ParseLocation::Byte((*base + *pos) as u64), "unexpected end of data"));
                }
                let v = ty.decode(&bytes[*pos..*pos + n]);
                if !v.is_finite() {
                    return Err(parse_err(path, ParseLocation::Byte((*base + *pos) as u64), "non-finite value"));
                }
                *pos += n;
                Ok(v)
            }
        }
    }
}

impl Ply {
    fn parse(path: &Path, bytes: &[u8]) -> Result<Ply> {
        let header_end = find_header_end(bytes)
            .ok_or_else(|| parse_err(path, ParseLocation::Byte(0), "missing end_header"))?;
        let header = std::str::from_utf8(&bytes[..header_end])
            .map_err(|_| parse_err(path, ParseLocation::Byte(0), "header is not UTF-8"))?;
        let mut lines = header.lines().enumerate();
        if lines.next().map(|(_, l)| l.trim()) != Some("ply") {
            return Err(parse_err(path, ParseLocation::Line(1), "missing 'ply' magic"));
        }
        let mut binary = None;
        let mut elements: Vec<Element> = Vec::new();
        for (i, line) in lines {
            let at = ParseLocation::Line(i + 1);
            let t: Vec<&str> = line.split_whitespace().collect();
            match t.first().copied() {
                Some("format") => {
                    binary = Some(match t.get(1).copied() {
                        Some("ascii") => false,
                        Some("binary_little_endian") => true,
                        Some("binary_big_endian") => {
                            return Err(parse_err(path, at, "big-endian PLY is not supported"));
                        }
                        other => return Err(parse_err(path, at, format!("unknown format {other:?}"))),
                    });
                }
                Some("element") => {
                    let (Some(name), Some(count)) = (t.get(1), t.get(2).and_then(|c| c.parse().ok())) else {
                        return Err(parse_err(path, at, "malformed element line"));
                    };
                    elements.push(Element { name: name.to_string(), count, props: Vec::new() });
                }
                Some("property") => {
                    let el = elements
                        .last_mut()
                        .ok_or_else(|| parse_err(path, at, "property before any element"))?;
                    let prop = match t.get(1).copied() {
                        Some("list") => {
                            let (Some(c), Some(v), Some(n)) = (
                                t.get(2).and_then(|s| Scalar::from_name(s)),
                                t.get(3).and_then(|s| Scalar::from_name(s)),
                                t.get(4),
                            ) else {
                                return Err(parse_err(path, at, "malformed list property"));
                            };
                            Property::List(n.to_string(), c, v)
                        }
                        Some(ty) => {
                            let (Some(s), Some(n)) = (Scalar::from_name(ty), t.get(2)) else {
                                return Err(parse_err(path, at, format!("unknown property type {ty:?}")));
                            };
                            Property::Scalar(n.to_string(), s)
                        }
                        None => return Err(parse_err(path, at, "malformed property line")),
                    };
                    el.props.push(prop);
                }
                Some("comment") | Some("obj_info") | Some("end_header") | None => {}
                Some(other) => return Err(parse_err(path, at, format!("unexpected header keyword {other:?}"))),
            }
        }
        let binary = binary.ok_or_else(|| parse_err(path, ParseLocation::Line(2), "missing format line"))?;

        let body_bytes = &bytes[header_end..];
        let mut body = if binary {
            Body::Binary { bytes: body_bytes, pos: 0, base: header_end }
        } else {
            let header_lines = header.lines().count();
            let text = std::str::from_utf8(body_bytes)
                .map_err(|_| parse_err(path, ParseLocation::Byte(header_end as u64), "ascii body is not UTF-8"))?;
            let it: Box<dyn Iterator<Item = (usize, &str)>> = Box::new(
                text.lines()
                    .enumerate()
                    .flat_map(move |(i, l)| l.split_whitespace().map(move |t| (header_lines + i + 1, t))),
            );
            Body::Ascii { tokens: it.peekable(), last_line: header_lines }
        };

        let mut ply = Ply { points: Vec::new(), normals: None, faces: Vec::new() };
        let mut saw_vertex = false;
        for el in &elements {
            let find = |n: &str| el.props.iter().position(|p| p.name() == n);
            let is_vertex = el.name == "vertex";
            let xyz = [find("x"), find("y"), find("z")];
            let nxyz = [find("nx"), find("ny"), find("nz")];
            let face_list = if el.name == "face" {
                find("vertex_indices").or_else(|| find("vertex_index"))
            } else {
                None
            };
            if is_vertex {
                if xyz.iter().any(Option::is_none) {
                    return Err(parse_err(path, ParseLocation::Line(1), "vertex element lacks x, y or z"));
                }
                saw_vertex = true;
                ply.points.reserve(el.count);
            }
            let has_normals = is_vertex && nxyz.iter().all(Option::is_some);
            let mut normals = Vec::new();
            let mut row = vec![0.0; el.props.len()];
            let mut list = Vec::new();
            for _ in 0..el.count {
                for (p, prop) in el.props.iter().enumerate() {
                    match prop {
                        Property::Scalar(_, ty) => row[p] = body.next(path, *ty)?,
                        Property::List(_, cty, vty) => {
                            let n = body.next(path, *cty)?;
                            if n < 0.0 {
                                return Err(parse_err(path, ParseLocation::Line(0), "negative list length"));
                            }
                            list.clear();
                            for _ in 0..n as usize {
                                list.push(body.next(path, *vty)?);
                            }
                            if Some(p) == face_list {
                                let idx: Vec<u32> = list.iter().map(|&v| v as u32).collect();
                                if list.iter().any(|&v| v < 0.0 || v > u32::MAX as f64) {
                                    return Err(parse_err(path, ParseLocation::Line(0), "face index out of range"));
                                }
                                fan(&idx, &mut ply.faces);
                            }
                        }
                    }
                }
                if is_vertex {
                    let [x, y, z] = xyz.map(|i| row[i.unwrap()]);
                    ply.points.push(Vec3::new(x, y, z));
                    if has_normals {
                        let [x, y, z] = nxyz.map(|i| row[i.unwrap()]);
                        normals.push(Vec3::new(x, y, z));
                    }
                }
            }
            if has_normals {
                ply.normals = Some(normals);
            }
        }
        if !saw_vertex {
            return Err(parse_err(path, ParseLocation::Line(1), "no vertex element"));
        }
        Ok(ply)
    }
}

fn find_header_end(bytes: &[u8]) -> Option<usize> {
    let marker = b"end_header";
    let pos = bytes.windows(marker.len()).position(|w| w == marker)?;
    let mut end = pos + marker.len();
    if bytes.get(end) == Some(&b'\r') {
        end += 1;
    }
    if bytes.get(end) == Some(&b'\n') {
        end += 1;
    }
    Some(end)
}

/// Writes to a temporary file beside `path` and renames it into place.
fn atomic_write(path: &Path, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let tmp = NamedTempFile::new_in(&dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        body(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// PLY face indices are int32.
fn check_index_width(vertex_count: usize) -> Result<()> {
    if vertex_count > i32::MAX as usize {
        return Err(Error::IndexOutOfRange { face: 0, index: vertex_count, len: i32::MAX as usize });
    }
    Ok(())
}

/// PLY (binary little-endian, double coordinates, int32 indices) or OBJ.
pub fn write_mesh(mesh: &TriangleMesh, path: &Path) -> Result<()> {
    let format = format_of(path)?;
    check_index_width(mesh.vertices().len())?;
    match format {
        Format::Ply => atomic_write(path, |w| {
            write!(
                w,
                "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nelement face {}\nproperty list uchar int vertex_indices\nend_header\n",
                mesh.vertices().len(),
                mesh.face_count()
            )?;
            for v in mesh.vertices() {
                for c in v.to_array() {
                    w.write_all(&c.to_le_bytes())?;
                }
            }
            for f in mesh.faces() {
                w.write_all(&[3u8])?;
                for &i in f {
                    w.write_all(&(i as i32).to_le_bytes())?;
                }
            }
            Ok(())
        }),
        Format::Obj => atomic_write(path, |w| {
            for v in mesh.vertices() {
                writeln!(w, "v {} {} {}", v.x, v.y, v.z)?;
            }
            for f in mesh.faces() {
                writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
            }
            Ok(())
        }),
        Format::Xyz => Err(Error::UnknownFormat(path.to_path_buf())),
    }
}

/// Binary PLY with `x y z nx ny nz` doubles, positions mapped to world space.
pub fn write_oriented_points(samples: &SampleSet, transform: &DomainTransform, path: &Path) -> Result<()> {
    let positions: Vec<Point3> = samples.positions().iter().map(|&p| transform.to_world(p)).collect();
    write_point_normals(&positions, samples.normals(), path)
}

pub fn write_point_normals(positions: &[Point3], normals: &[Vec3], path: &Path) -> Result<()> {
    if positions.len() != normals.len() {
        return Err(Error::CountMismatch { left: positions.len(), right: normals.len() });
    }
    if format_of(path)? != Format::Ply {
        return Err(Error::UnknownFormat(path.to_path_buf()));
    }
    atomic_write(path, |w| {
        write!(w, "ply\nformat binary_little_endian 1.0\nelement vertex {}\n", positions.len())?;
        for n in ["x", "y", "z", "nx", "ny", "nz"] {
            writeln!(w, "property double {n}")?;
        }
        w.write_all(b"end_header\n")?;
        for (p, n) in positions.iter().zip(normals) {
            for c in p.to_array().into_iter().chain(n.to_array()) {
                w.write_all(&c.to_le_bytes())?;
            }
        }
        Ok(())
    })
}

/// Plain `x y z` lines; coordinates print in shortest round-trip form.
pub fn write_points_xyz(points: &[Point3], path: &Path) -> Result<()> {
    atomic_write(path, |w| {
        for p in points {
            writeln!(w, "{} {} {}", p.x, p.y, p.z)?;
        }
        Ok(())
    })
}
