//! PLY point clouds: ASCII and binary little-endian.
//!
//! Only the `vertex` element is loaded. `x`, `y`, `z` must be `float` or
//! `double`; properties named `feat_0 .. feat_{k-1}` become per-point
//! features; anything else (colors, normals, faces) is skipped.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::{Features, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
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

    fn is_float(self) -> bool {
        matches!(self, Scalar::F32 | Scalar::F64)
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
    format: PlyFormat,
    elements: Vec<Element>,
    /// Byte offset of the first data byte.
    data_start: usize,
    /// Line number (1-based) of the first data line.
    data_line: usize,
}

struct VertexLayout {
    xyz: [usize; 3],
    features: Vec<usize>,
}

pub fn read_ply(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_ply(&bytes, path)
}

/// Parses PLY bytes; `path` is only used in error messages.
pub fn parse_ply(bytes: &[u8], path: &Path) -> Result<PointCloud> {
    let header = parse_header(bytes, path)?;
    let vertex_pos = header
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| Error::format(path, "header", "no vertex element"))?;
    let layout = vertex_layout(&header.elements[vertex_pos], path)?;

    let (points, feats) = match header.format {
        PlyFormat::Ascii => read_ascii(bytes, &header, vertex_pos, &layout, path)?,
        PlyFormat::BinaryLittleEndian => read_binary(bytes, &header, vertex_pos, &layout, path)?,
    };
    let features = if layout.features.is_empty() {
        None
    } else {
        Some(Features::new(layout.features.len(), feats).map_err(|e| Error::format(path, "data", e.to_string()))?)
    };
    PointCloud::with_features(points, features).map_err(|e| Error::format(path, "data", e.to_string()))
}

fn parse_header(bytes: &[u8], path: &Path) -> Result<Header> {
    let mut offset = 0;
    let mut line_no = 0;
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let rest = &bytes[offset..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::format(path, format!("line {}", line_no + 1), "header is not terminated by end_header"))?;
        line_no += 1;
        let loc = format!("line {line_no}");
        let raw = std::str::from_utf8(&rest[..end]).map_err(|_| Error::format(path, &loc, "header is not valid UTF-8"))?;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        offset += end + 1;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if line_no == 1 {
            if tokens != ["ply"] {
                return Err(Error::format(path, loc, "missing 'ply' magic"));
            }
            continue;
        }
        match tokens.first().copied() {
            Some("format") => {
                if tokens.len() != 3 {
                    return Err(Error::format(path, loc, "malformed format line"));
                }
                format = Some(match tokens[1] {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLittleEndian,
                    "binary_big_endian" => {
                        return Err(Error::UnsupportedFormat {
                            path: path.into(),
                            message: "binary_big_endian PLY is not supported".into(),
                        })
                    }
                    other => return Err(Error::format(path, loc, format!("unknown format '{other}'"))),
                });
            }
            Some("comment") | Some("obj_info") => {}
            Some("element") => {
                if tokens.len() != 3 {
                    return Err(Error::format(path, loc, "malformed element line"));
                }
                let count = tokens[2]
                    .parse()
                    .map_err(|_| Error::format(path, &loc, format!("invalid element count '{}'", tokens[2])))?;
                elements.push(Element {
                    name: tokens[1].to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| Error::format(path, &loc, "property before any element"))?;
                let scalar = |name: &str| {
                    Scalar::parse(name).ok_or_else(|| Error::format(path, &loc, format!("unknown property type '{name}'")))
                };
                let prop = match tokens.as_slice() {
                    ["property", "list", count, item, _name] => Property::List {
                        count: scalar(count)?,
                        item: scalar(item)?,
                    },
                    ["property", ty, name] => Property::Scalar {
                        name: name.to_string(),
                        ty: scalar(ty)?,
                    },
                    _ => return Err(Error::format(path, loc, "malformed property line")),
                };
                element.properties.push(prop);
            }
            Some("end_header") => {
                let format = format.ok_or_else(|| Error::format(path, &loc, "missing format line"))?;
                return Ok(Header {
                    format,
                    elements,
                    data_start: offset,
                    data_line: line_no + 1,
                });
            }
            _ => return Err(Error::format(path, loc, format!("unexpected header line '{line}'"))),
        }
    }
}

fn vertex_layout(vertex: &Element, path: &Path) -> Result<VertexLayout> {
    let find = |wanted: &str| {
        vertex.properties.iter().enumerate().find_map(|(k, p)| match p {
            Property::Scalar { name, ty } if name == wanted => Some((k, *ty)),
            _ => None,
        })
    };
    let mut xyz = [0; 3];
    for (slot, axis) in ["x", "y", "z"].iter().enumerate() {
        let (k, ty) = find(axis).ok_or_else(|| Error::format(path, "header", format!("vertex has no '{axis}' property")))?;
        if !ty.is_float() {
            return Err(Error::UnsupportedFormat {
                path: path.into(),
                message: format!("vertex property '{axis}' must be float or double"),
            });
        }
        xyz[slot] = k;
    }
    let mut features = Vec::new();
    while let Some((k, _)) = find(&format!("feat_{}", features.len())) {
        features.push(k);
    }
    Ok(VertexLayout { xyz, features })
}

fn read_ascii(
    bytes: &[u8],
    header: &Header,
    vertex_pos: usize,
    layout: &VertexLayout,
    path: &Path,
) -> Result<(Vec<Vector3<f64>>, Vec<f64>)> {
    let text = std::str::from_utf8(&bytes[header.data_start..])
        .map_err(|e| Error::format(path, format!("byte {}", header.data_start + e.valid_up_to()), "data is not valid UTF-8"))?;
    let mut lines = text.lines().enumerate().map(|(k, l)| (header.data_line + k, l));
    let mut next_record = |what: &str| {
        lines
            .by_ref()
            .find(|(_, l)| !l.trim().is_empty())
            .ok_or_else(|| Error::format(path, "end of file", format!("missing {what} record")))
    };

    for element in &header.elements[..vertex_pos] {
        for _ in 0..element.count {
            next_record(&element.name)?;
        }
    }

    let vertex = &header.elements[vertex_pos];
    let mut points = Vec::with_capacity(vertex.count);
    let mut feats = Vec::with_capacity(vertex.count * layout.features.len());
    let has_lists = vertex.properties.iter().any(|p| matches!(p, Property::List { .. }));
    for _ in 0..vertex.count {
        let (line_no, line) = next_record("vertex")?;
        let loc = format!("line {line_no}");
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| Error::format(path, &loc, format!("invalid number '{t}'"))))
            .collect::<Result<_>>()?;
        let values = if has_lists {
            flatten_lists(&values, &vertex.properties)
                .ok_or_else(|| Error::format(path, &loc, "vertex list lengths do not match the line"))?
        } else if values.len() != vertex.properties.len() {
            return Err(Error::format(
                path,
                loc,
                format!("expected {} values, found {}", vertex.properties.len(), values.len()),
            ));
        } else {
            values
        };
        push_vertex(&values, layout, &mut points, &mut feats);
    }
    Ok((points, feats))
}

/// Collapses list properties into a single placeholder so positions match
/// the property indices. `None` if the line length disagrees with the lists.
fn flatten_lists(values: &[f64], props: &[Property]) -> Option<Vec<f64>> {
    let mut out = Vec::with_capacity(props.len());
    let mut k = 0;
    for p in props {
        match p {
            Property::Scalar { .. } => {
                out.push(*values.get(k)?);
                k += 1;
            }
            Property::List { .. } => {
                let n = *values.get(k)?;
                if n < 0.0 || n.fract() != 0.0 {
                    return None;
                }
                out.push(0.0);
                k += 1 + n as usize;
            }
        }
    }
    (k == values.len()).then_some(out)
}

fn push_vertex(values: &[f64], layout: &VertexLayout, points: &mut Vec<Vector3<f64>>, feats: &mut Vec<f64>) {
    points.push(Vector3::new(values[layout.xyz[0]], values[layout.xyz[1]], values[layout.xyz[2]]));
    feats.extend(layout.features.iter().map(|&k| values[k]));
}

fn read_binary(
    bytes: &[u8],
    header: &Header,
    vertex_pos: usize,
    layout: &VertexLayout,
    path: &Path,
) -> Result<(Vec<Vector3<f64>>, Vec<f64>)> {
    let mut offset = header.data_start;
    let take = |offset: &mut usize, n: usize| -> Result<&[u8]> {
        let start = *offset;
        let slice = bytes
            .get(start..start + n)
            .ok_or_else(|| Error::format(path, format!("byte {start}"), "unexpected end of data"))?;
        *offset += n;
        Ok(slice)
    };
    let read_record = |offset: &mut usize, props: &[Property], out: &mut Vec<f64>| -> Result<()> {
        out.clear();
        for p in props {
            match p {
                Property::Scalar { ty, .. } => out.push(ty.decode(take(offset, ty.size())?)),
                Property::List { count, item } => {
                    let at = *offset;
                    let n = count.decode(take(offset, count.size())?);
                    if n < 0.0 {
                        return Err(Error::format(path, format!("byte {at}"), "negative list length"));
                    }
                    take(offset, n as usize * item.size())?;
                    out.push(0.0);
                }
            }
        }
        Ok(())
    };

    let mut values = Vec::new();
    for element in &header.elements[..vertex_pos] {
        for _ in 0..element.count {
            read_record(&mut offset, &element.properties, &mut values)?;
        }
    }
    let vertex = &header.elements[vertex_pos];
    let mut points = Vec::with_capacity(vertex.count);
    let mut feats = Vec::with_capacity(vertex.count * layout.features.len());
    for _ in 0..vertex.count {
        read_record(&mut offset, &vertex.properties, &mut values)?;
        push_vertex(&values, layout, &mut points, &mut feats);
    }
    Ok((points, feats))
}

/// Writes `cloud` with `float` (32-bit) properties: `x y z` and, if present,
/// `feat_0 ..`. Reading the file back gives the float32-rounded values.
pub fn write_ply(cloud: &PointCloud, path: impl AsRef<Path>, format: PlyFormat) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_ply(cloud, format);
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn encode_ply(cloud: &PointCloud, format: PlyFormat) -> Vec<u8> {
    let dim = cloud.features().map_or(0, |f| f.dim());
    let mut out = Vec::new();
    let name = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    writeln!(out, "ply\nformat {name} 1.0\nelement vertex {}", cloud.len()).unwrap();
    for axis in ["x", "y", "z"] {
        writeln!(out, "property float {axis}").unwrap();
    }
    for k in 0..dim {
        writeln!(out, "property float feat_{k}").unwrap();
    }
    writeln!(out, "end_header").unwrap();

    for (i, p) in cloud.points().iter().enumerate() {
        let feats = cloud.features().map_or(&[][..], |f| f.row(i));
        let values = p.iter().chain(feats).map(|&v| v as f32);
        match format {
            PlyFormat::Ascii => {
                let line: Vec<String> = values.map(|v| v.to_string()).collect();
                writeln!(out, "{}", line.join(" ")).unwrap();
            }
            PlyFormat::BinaryLittleEndian => {
                for v in values {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
    }
    out
}
