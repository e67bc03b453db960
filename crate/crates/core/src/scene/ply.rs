//! PLY reading and writing for the vertex element.
//!
//! Reads ASCII and `binary_little_endian 1.0`. Other elements (faces and
//! the like) are skipped. Besides `x/y/z` and `red/green/blue` the reader
//! understands an integer `instance` vertex property together with
//! `comment instance <id> <class name>` header lines, which is how
//! instance annotations travel with a scene file.

use std::fs;
use std::io::Write;
use std::path::Path;

use log::warn;

use super::{ColorSource, InstanceAnnotation, Point, Scene};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => ScalarType::I8,
            "uchar" | "uint8" => ScalarType::U8,
            "short" | "int16" => ScalarType::I16,
            "ushort" | "uint16" => ScalarType::U16,
            "int" | "int32" => ScalarType::I32,
            "uint" | "uint32" => ScalarType::U32,
            "float" | "float32" => ScalarType::F32,
            "double" | "float64" => ScalarType::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            ScalarType::I8 | ScalarType::U8 => 1,
            ScalarType::I16 | ScalarType::U16 => 2,
            ScalarType::I32 | ScalarType::U32 | ScalarType::F32 => 4,
            ScalarType::F64 => 8,
        }
    }

    fn is_float(self) -> bool {
        matches!(self, ScalarType::F32 | ScalarType::F64)
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            ScalarType::I8 => f64::from(b[0] as i8),
            ScalarType::U8 => f64::from(b[0]),
            ScalarType::I16 => f64::from(i16::from_le_bytes([b[0], b[1]])),
            ScalarType::U16 => f64::from(u16::from_le_bytes([b[0], b[1]])),
            ScalarType::I32 => f64::from(i32::from_le_bytes([b[0], b[1], b[2], b[3]])),
            ScalarType::U32 => f64::from(u32::from_le_bytes([b[0], b[1], b[2], b[3]])),
            ScalarType::F32 => f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])),
            ScalarType::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: ScalarType },
    List { count: ScalarType, item: ScalarType },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Ascii,
    BinaryLe,
}

#[derive(Debug)]
struct Header {
    format: Format,
    elements: Vec<Element>,
    scene_id: Option<String>,
    color_note: Option<ColorSource>,
    instance_classes: Vec<(u32, String)>,
    /// Byte offset of the first data byte.
    data_start: usize,
    /// 1-based line number of the first data line (ASCII bodies).
    data_line: usize,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let mut pos = 0;
    let mut line_no = 0;
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    let mut scene_id = None;
    let mut color_note = None;
    let mut instance_classes = Vec::new();

    loop {
        let rest = &bytes[pos..];
        let Some(nl) = rest.iter().position(|&b| b == b'\n') else {
            return Err(parse_err(line_no + 1, "header ended before `end_header`"));
        };
        line_no += 1;
        let raw = &rest[..nl];
        pos += nl + 1;
        let line = std::str::from_utf8(raw)
            .map_err(|_| parse_err(line_no, "header line is not valid UTF-8"))?
            .trim_end_matches('\r');
        let mut words = line.split_whitespace();
        let keyword = words.next().unwrap_or("");

        if line_no == 1 {
            if line.trim() != "ply" {
                return Err(parse_err(1, format!("expected `ply` magic, found {line:?}")));
            }
            continue;
        }
        match keyword {
            "format" => {
                let kind = words.next().unwrap_or("");
                let version = words.next().unwrap_or("");
                if version != "1.0" {
                    return Err(parse_err(line_no, format!("unsupported PLY version {version:?}")));
                }
                format = Some(match kind {
                    "ascii" => Format::Ascii,
                    "binary_little_endian" => Format::BinaryLe,
                    other => {
                        return Err(parse_err(line_no, format!("unsupported PLY format {other:?}")))
                    }
                });
            }
            "comment" => {
                let body = line["comment".len()..].trim();
                if let Some(id) = body.strip_prefix("scene_id ") {
                    scene_id = Some(id.trim().to_string());
                } else if body == "colors requantized" {
                    color_note = Some(ColorSource::Requantized);
                } else if body == "colors missing" {
                    color_note = Some(ColorSource::Missing);
                } else if let Some(rest) = body.strip_prefix("instance ") {
                    let rest = rest.trim();
                    let (id, class) = rest.split_once(' ').ok_or_else(|| {
                        parse_err(line_no, "instance comment needs `<id> <class name>`")
                    })?;
                    let id: u32 = id
                        .parse()
                        .map_err(|_| parse_err(line_no, format!("bad instance id {id:?}")))?;
                    instance_classes.push((id, class.trim().to_string()));
                }
            }
            "obj_info" => {}
            "element" => {
                let name = words
                    .next()
                    .ok_or_else(|| parse_err(line_no, "element without a name"))?;
                let count = words
                    .next()
                    .and_then(|c| c.parse::<usize>().ok())
                    .ok_or_else(|| parse_err(line_no, "element count is not a non-negative integer"))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            "property" => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(line_no, "property before any element"))?;
                let first = words.next().unwrap_or("");
                if first == "list" {
                    let count = words.next().and_then(ScalarType::parse);
                    let item = words.next().and_then(ScalarType::parse);
                    let name = words.next();
                    match (count, item, name) {
                        (Some(count), Some(item), Some(_)) if !count.is_float() => {
                            element.properties.push(Property::List { count, item })
                        }
                        _ => return Err(parse_err(line_no, format!("malformed list property {line:?}"))),
                    }
                } else {
                    let ty = ScalarType::parse(first)
                        .ok_or_else(|| parse_err(line_no, format!("unknown property type {first:?}")))?;
                    let name = words
                        .next()
                        .ok_or_else(|| parse_err(line_no, "property without a name"))?;
                    element.properties.push(Property::Scalar {
                        name: name.to_string(),
                        ty,
                    });
                }
            }
            "end_header" => break,
            "" => return Err(parse_err(line_no, "empty header line")),
            other => return Err(parse_err(line_no, format!("unknown header keyword {other:?}"))),
        }
    }

    let format = format.ok_or_else(|| parse_err(line_no, "header has no `format` line"))?;
    Ok(Header {
        format,
        elements,
        scene_id,
        color_note,
        instance_classes,
        data_start: pos,
        data_line: line_no + 1,
    })
}

/// Column positions of the properties we care about inside the vertex element.
struct VertexLayout {
    xyz: [usize; 3],
    rgb: Option<[(usize, ScalarType); 3]>,
    instance: Option<usize>,
}

fn vertex_layout(element: &Element, line: usize) -> Result<VertexLayout> {
    let find = |want: &str| {
        element.properties.iter().enumerate().find_map(|(i, p)| match p {
            Property::Scalar { name, ty } if name == want => Some((i, *ty)),
            _ => None,
        })
    };
    if element.properties.iter().any(|p| matches!(p, Property::List { .. })) {
        return Err(parse_err(line, "list properties on the vertex element are not supported"));
    }
    let mut xyz = [0; 3];
    for (slot, name) in xyz.iter_mut().zip(["x", "y", "z"]) {
        let (i, ty) = find(name)
            .ok_or_else(|| parse_err(line, format!("vertex element lacks property `{name}`")))?;
        if !ty.is_float() {
            return Err(parse_err(line, format!("vertex property `{name}` must be float or double")));
        }
        *slot = i;
    }
    let rgb = match (find("red"), find("green"), find("blue")) {
        (Some(r), Some(g), Some(b)) => Some([r, g, b]),
        (None, None, None) => None,
        _ => return Err(parse_err(line, "vertex element has only some of red/green/blue")),
    };
    let instance = match find("instance") {
        Some((i, ty)) if !ty.is_float() => Some(i),
        Some(_) => return Err(parse_err(line, "vertex property `instance` must be an integer type")),
        None => None,
    };
    Ok(VertexLayout { xyz, rgb, instance })
}

/// Reads a scene from a PLY file. The scene id is taken from a
/// `comment scene_id` header line, falling back to the file stem.
pub fn load_ply(path: impl AsRef<Path>) -> Result<Scene> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let fallback = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scene".to_string());
    parse_ply(&bytes, &fallback)
}

/// Parses PLY bytes. `default_id` is used when the header names no scene.
pub fn parse_ply(bytes: &[u8], default_id: &str) -> Result<Scene> {
    let header = parse_header(bytes)?;
    let vertex_pos = header
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| parse_err(header.data_line - 1, "no `vertex` element in header"))?;
    let vertex = &header.elements[vertex_pos];
    let layout = vertex_layout(vertex, header.data_line - 1)?;
    if vertex.count == 0 {
        return Err(Error::Validation("PLY declares 0 vertices (N >= 1 required)".into()));
    }

    let rows = match header.format {
        Format::Ascii => read_ascii_rows(bytes, &header, vertex_pos)?,
        Format::BinaryLe => read_binary_rows(bytes, &header, vertex_pos)?,
    };

    let mut color_source = header.color_note.unwrap_or(ColorSource::Integer);
    if layout.rgb.is_none() {
        warn!("PLY has no color properties; colors default to 0");
        color_source = ColorSource::Missing;
    } else if let Some([(_, ty), _, _]) = layout.rgb {
        if ty.is_float() {
            color_source = ColorSource::Requantized;
        }
    }

    let mut points = Vec::with_capacity(rows.len());
    let mut point_instance = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let rgb = match layout.rgb {
            None => [0, 0, 0],
            Some(cols) => {
                let mut out = [0u8; 3];
                for (c, (col, ty)) in cols.iter().enumerate() {
                    out[c] = color_channel(row[*col], ty.is_float(), i)?;
                }
                out
            }
        };
        points.push(Point::new(row[layout.xyz[0]], row[layout.xyz[1]], row[layout.xyz[2]], rgb));
        if let Some(col) = layout.instance {
            point_instance.push(row[col] as i64);
        }
    }

    let instances = if layout.instance.is_some() {
        Some(collect_instances(&point_instance, &header.instance_classes)?)
    } else if !header.instance_classes.is_empty() {
        return Err(Error::Validation(
            "instance comments present but vertex element has no `instance` property".into(),
        ));
    } else {
        None
    };

    let scene_id = header.scene_id.clone().unwrap_or_else(|| default_id.to_string());
    Ok(Scene::new(scene_id, points, instances)?.with_color_source(color_source))
}

fn color_channel(v: f64, normalized: bool, point: usize) -> Result<u8> {
    let q = if normalized {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Validation(format!(
                "point {point} has normalized color {v} outside [0, 1]"
            )));
        }
        (255.0 * v).round()
    } else {
        v
    };
    if !(0.0..=255.0).contains(&q) {
        return Err(Error::Validation(format!("point {point} has color {v} outside [0, 255]")));
    }
    Ok(q as u8)
}

fn collect_instances(point_instance: &[i64], classes: &[(u32, String)]) -> Result<Vec<InstanceAnnotation>> {
    let mut out: Vec<InstanceAnnotation> = classes
        .iter()
        .map(|(id, class)| InstanceAnnotation {
            instance_id: *id,
            class_name: class.clone(),
            point_indices: Vec::new(),
        })
        .collect();
    for (i, &id) in point_instance.iter().enumerate() {
        if id < 0 {
            continue;
        }
        let slot = out
            .iter_mut()
            .find(|inst| i64::from(inst.instance_id) == id)
            .ok_or_else(|| {
                Error::Validation(format!("point {i} references undeclared instance {id}"))
            })?;
        slot.point_indices.push(i);
    }
    Ok(out)
}

fn read_ascii_rows(bytes: &[u8], header: &Header, vertex_pos: usize) -> Result<Vec<Vec<f64>>> {
    let body = std::str::from_utf8(&bytes[header.data_start..])
        .map_err(|_| parse_err(header.data_line, "ASCII body is not valid UTF-8"))?;
    let mut lines = body.lines().enumerate().map(|(i, l)| (header.data_line + i, l));
    for element in &header.elements[..vertex_pos] {
        for _ in 0..element.count {
            lines
                .next()
                .ok_or_else(|| parse_err(header.data_line, format!("truncated `{}` element", element.name)))?;
        }
    }
    let vertex = &header.elements[vertex_pos];
    let mut rows = Vec::with_capacity(vertex.count);
    for _ in 0..vertex.count {
        let (line_no, line) = lines
            .next()
            .ok_or_else(|| parse_err(header.data_line, "file ends before all vertices were read"))?;
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| parse_err(line_no, format!("non-numeric vertex value in {line:?}")))?;
        if values.len() != vertex.properties.len() {
            return Err(parse_err(
                line_no,
                format!("expected {} values, found {}", vertex.properties.len(), values.len()),
            ));
        }
        rows.push(values);
    }
    Ok(rows)
}

fn read_binary_rows(bytes: &[u8], header: &Header, vertex_pos: usize) -> Result<Vec<Vec<f64>>> {
    let mut pos = header.data_start;
    let truncated = |what: &str| Error::Validation(format!("binary PLY body truncated while reading {what}"));
    for element in &header.elements[..vertex_pos] {
        for _ in 0..element.count {
            for prop in &element.properties {
                match prop {
                    Property::Scalar { ty, .. } => pos += ty.size(),
                    Property::List { count, item } => {
                        let end = pos + count.size();
                        let n = bytes.get(pos..end).ok_or_else(|| truncated(&element.name))?;
                        let n = count.read_le(n);
                        if n < 0.0 {
                            return Err(truncated(&element.name));
                        }
                        pos = end + n as usize * item.size();
                    }
                }
            }
            if pos > bytes.len() {
                return Err(truncated(&element.name));
            }
        }
    }
    let vertex = &header.elements[vertex_pos];
    let mut rows = Vec::with_capacity(vertex.count);
    for _ in 0..vertex.count {
        let mut row = Vec::with_capacity(vertex.properties.len());
        for prop in &vertex.properties {
            let Property::Scalar { ty, .. } = prop else { unreachable!() };
            let end = pos + ty.size();
            let b = bytes.get(pos..end).ok_or_else(|| truncated("vertex"))?;
            row.push(ty.read_le(b));
            pos = end;
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Writes a binary little-endian PLY with `double` coordinates, `uchar`
/// colors and, when the scene is annotated, an `int instance` property.
///
/// `load_ply` on the result reproduces the scene exactly, including the id,
/// the color-source flag and the instance list.
pub fn export_ply(scene: &Scene, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_ply(scene);
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub(crate) fn encode_ply(scene: &Scene) -> Vec<u8> {
    let mut header = String::from("ply\nformat binary_little_endian 1.0\n");
    header.push_str(&format!("comment scene_id {}\n", scene.scene_id()));
    match scene.color_source() {
        ColorSource::Integer => {}
        ColorSource::Requantized => header.push_str("comment colors requantized\n"),
        ColorSource::Missing => header.push_str("comment colors missing\n"),
    }
    let mut point_instance = vec![-1i32; scene.len()];
    if let Some(instances) = scene.instances() {
        for inst in instances {
            header.push_str(&format!("comment instance {} {}\n", inst.instance_id, inst.class_name));
            for &i in &inst.point_indices {
                point_instance[i] = inst.instance_id as i32;
            }
        }
    }
    header.push_str(&format!("element vertex {}\n", scene.len()));
    header.push_str("property double x\nproperty double y\nproperty double z\n");
    header.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    let annotated = scene.instances().is_some();
    if annotated {
        header.push_str("property int instance\n");
    }
    header.push_str("end_header\n");

    let stride = 27 + if annotated { 4 } else { 0 };
    let mut out = Vec::with_capacity(header.len() + stride * scene.len());
    out.extend_from_slice(header.as_bytes());
    for (p, inst) in scene.points().iter().zip(&point_instance) {
        out.extend_from_slice(&p.x.to_le_bytes());
        out.extend_from_slice(&p.y.to_le_bytes());
        out.extend_from_slice(&p.z.to_le_bytes());
        out.extend_from_slice(&[p.r, p.g, p.b]);
        if annotated {
            out.extend_from_slice(&inst.to_le_bytes());
        }
    }
    out
}
