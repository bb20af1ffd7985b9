//! File formats: PLY point clouds and meshes, HWDM float rasters, PNG images, camera JSON.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Camera, CameraJson, DepthMap, NormalMap, PointCloud, RgbImage, TriangleMesh, Vec3};

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::parse(path, e.column() as u64, e.to_string()))
}

pub fn read_camera(path: &Path) -> Result<Camera> {
    let j: CameraJson = read_json(path)?;
    Camera::try_from(j)
}

pub fn write_camera(path: &Path, cam: &Camera) -> Result<()> {
    write_json(path, &CameraJson::from(cam))
}

// ---------------------------------------------------------------- HWDM

const HWDM_MAGIC: &[u8; 4] = b"HWDM";

/// Raw float raster: `channels` interleaved float32 values per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub width: u32,
    pub height: u32,
    pub channels: u32,
    pub data: Vec<f32>,
}

pub fn encode_hwdm(r: &Raster) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 4 * r.data.len());
    out.extend_from_slice(HWDM_MAGIC);
    out.extend_from_slice(&r.width.to_le_bytes());
    out.extend_from_slice(&r.height.to_le_bytes());
    out.extend_from_slice(&r.channels.to_le_bytes());
    for v in &r.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_hwdm(path: &Path, bytes: &[u8]) -> Result<Raster> {
    if bytes.len() < 16 {
        return Err(Error::parse(path, bytes.len() as u64, "truncated HWDM header"));
    }
    if &bytes[..4] != HWDM_MAGIC {
        return Err(Error::parse(path, 0, "bad HWDM magic"));
    }
    let word = |k: usize| u32::from_le_bytes(bytes[k..k + 4].try_into().unwrap());
    let (width, height, channels) = (word(4), word(8), word(12));
    let n = width as usize * height as usize * channels as usize;
    if bytes.len() != 16 + 4 * n {
        return Err(Error::parse(
            path,
            16,
            format!(
                "{width}x{height}x{channels} raster needs {} payload bytes, found {}",
                4 * n,
                bytes.len() - 16
            ),
        ));
    }
    let data = bytes[16..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Raster {
        width,
        height,
        channels,
        data,
    })
}

pub fn read_raster(path: &Path) -> Result<Raster> {
    decode_hwdm(path, &read_bytes(path)?)
}

pub fn write_raster(path: &Path, r: &Raster) -> Result<()> {
    write_atomic(path, &encode_hwdm(r))
}

/// Invalid pixels are stored as 0.
pub fn depth_to_raster(d: &DepthMap) -> Raster {
    Raster {
        width: d.width,
        height: d.height,
        channels: 1,
        data: d
            .values
            .iter()
            .zip(&d.valid)
            .map(|(v, ok)| if *ok { *v as f32 } else { 0.0 })
            .collect(),
    }
}

pub fn raster_to_depth(path: &Path, r: &Raster) -> Result<DepthMap> {
    if r.channels != 1 {
        return Err(Error::parse(
            path,
            12,
            format!("depth raster needs 1 channel, got {}", r.channels),
        ));
    }
    DepthMap::from_values(r.width, r.height, r.data.iter().map(|v| *v as f64).collect())
}

pub fn read_depth(path: &Path) -> Result<DepthMap> {
    raster_to_depth(path, &read_raster(path)?)
}

pub fn write_depth(path: &Path, d: &DepthMap) -> Result<()> {
    write_raster(path, &depth_to_raster(d))
}

pub fn read_normals(path: &Path) -> Result<NormalMap> {
    let r = read_raster(path)?;
    if r.channels != 3 {
        return Err(Error::parse(
            path,
            12,
            format!("normal raster needs 3 channels, got {}", r.channels),
        ));
    }
    let vecs = r
        .data
        .chunks_exact(3)
        .map(|c| Vec3::new(c[0] as f64, c[1] as f64, c[2] as f64))
        .collect();
    NormalMap::from_vectors(r.width, r.height, vecs)
}

pub fn write_normals(path: &Path, n: &NormalMap) -> Result<()> {
    let mut data = Vec::with_capacity(3 * n.vectors.len());
    for (v, ok) in n.vectors.iter().zip(&n.valid) {
        let v = if *ok { *v } else { Vec3::zeros() };
        data.extend([v.x as f32, v.y as f32, v.z as f32]);
    }
    write_raster(
        path,
        &Raster {
            width: n.width,
            height: n.height,
            channels: 3,
            data,
        },
    )
}

/// Single-channel scalar map such as a confidence map; no validity semantics.
pub fn read_scalar(path: &Path) -> Result<(u32, u32, Vec<f64>)> {
    let r = read_raster(path)?;
    if r.channels != 1 {
        return Err(Error::parse(
            path,
            12,
            format!("scalar raster needs 1 channel, got {}", r.channels),
        ));
    }
    Ok((r.width, r.height, r.data.iter().map(|v| *v as f64).collect()))
}

pub fn write_scalar(path: &Path, width: u32, height: u32, values: &[f64]) -> Result<()> {
    write_raster(
        path,
        &Raster {
            width,
            height,
            channels: 1,
            data: values.iter().map(|v| *v as f32).collect(),
        },
    )
}

// ---------------------------------------------------------------- PNG

pub fn read_png(path: &Path) -> Result<RgbImage> {
    let img = image::open(path)
        .map_err(|e| Error::parse(path, 0, e.to_string()))?
        .to_rgb8();
    let (w, h) = img.dimensions();
    Ok(RgbImage::from_fn(w, h, |u, v| {
        let p = img.get_pixel(u, v).0;
        [p[0] as f64 / 255.0, p[1] as f64 / 255.0, p[2] as f64 / 255.0]
    }))
}

pub fn write_png(path: &Path, img: &RgbImage) -> Result<()> {
    let out = image::RgbImage::from_fn(img.width, img.height, |u, v| {
        image::Rgb(img.get(u, v).map(|c| (c.clamp(0.0, 1.0) * 255.0).round() as u8))
    });
    let mut buf = std::io::Cursor::new(Vec::new());
    out.write_to(&mut buf, image::ImageFormat::Png)
        .map_err(|e| Error::parse(path, 0, e.to_string()))?;
    write_atomic(path, buf.get_ref())
}

/// Grayscale mask; pixels above mid-gray are set.
pub fn read_mask(path: &Path) -> Result<(u32, u32, Vec<bool>)> {
    let img = image::open(path)
        .map_err(|e| Error::parse(path, 0, e.to_string()))?
        .to_luma8();
    let (w, h) = img.dimensions();
    Ok((w, h, img.pixels().map(|p| p.0[0] > 127).collect()))
}

pub fn write_mask(path: &Path, width: u32, height: u32, mask: &[bool]) -> Result<()> {
    let out = image::GrayImage::from_fn(width, height, |u, v| {
        image::Luma([if mask[(v * width + u) as usize] { 255 } else { 0 }])
    });
    let mut buf = std::io::Cursor::new(Vec::new());
    out.write_to(&mut buf, image::ImageFormat::Png)
        .map_err(|e| Error::parse(path, 0, e.to_string()))?;
    write_atomic(path, buf.get_ref())
}

// ---------------------------------------------------------------- PLY

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq)]
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
    fn parse(s: &str) -> Option<Scalar> {
        Some(match s {
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
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
struct Property {
    name: String,
    kind: Scalar,
    // count type for list properties
    list: Option<Scalar>,
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

/// Parsed element rows; list properties are stored as their own vectors.
#[derive(Debug, Default)]
struct ElementData {
    scalars: Vec<Vec<f64>>,
    lists: Vec<Vec<Vec<f64>>>,
}

struct Cursor<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse(self.path, self.pos as u64, msg)
    }

    fn line(&mut self) -> Result<&'a str> {
        let rest = &self.bytes[self.pos..];
        let end = rest
            .iter()
            .position(|b| *b == b'\n')
            .ok_or_else(|| self.err("unterminated header line"))?;
        let line = std::str::from_utf8(&rest[..end]).map_err(|_| self.err("header is not UTF-8"))?;
        self.pos += end + 1;
        Ok(line.trim_end_matches('\r'))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(self.err("unexpected end of binary payload"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
}

fn parse_ply(path: &Path, bytes: &[u8]) -> Result<Vec<(Element, ElementData)>> {
    let mut cur = Cursor { path, bytes, pos: 0 };
    if cur.line()? != "ply" {
        return Err(Error::parse(path, 0, "missing ply magic"));
    }
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let line = cur.line()?;
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("format") => {
                format = Some(match tok.next() {
                    Some("ascii") => PlyFormat::Ascii,
                    Some("binary_little_endian") => PlyFormat::BinaryLittleEndian,
                    other => return Err(cur.err(format!("unsupported PLY format {other:?}"))),
                })
            }
            Some("element") => {
                let name = tok.next().ok_or_else(|| cur.err("element without name"))?.to_string();
                let count = tok
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| cur.err("element without count"))?;
                elements.push(Element {
                    name,
                    count,
                    props: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements.last_mut().ok_or_else(|| cur.err("property before element"))?;
                let t = tok.next().ok_or_else(|| cur.err("property without type"))?;
                let prop = if t == "list" {
                    let ct = tok
                        .next()
                        .and_then(Scalar::parse)
                        .ok_or_else(|| cur.err("bad list count type"))?;
                    let it = tok
                        .next()
                        .and_then(Scalar::parse)
                        .ok_or_else(|| cur.err("bad list item type"))?;
                    let name = tok.next().ok_or_else(|| cur.err("list without name"))?;
                    Property {
                        name: name.into(),
                        kind: it,
                        list: Some(ct),
                    }
                } else {
                    let kind = Scalar::parse(t).ok_or_else(|| cur.err(format!("unknown property type {t}")))?;
                    let name = tok.next().ok_or_else(|| cur.err("property without name"))?;
                    Property {
                        name: name.into(),
                        kind,
                        list: None,
                    }
                };
                el.props.push(prop);
            }
            Some("comment") | Some("obj_info") | None => {}
            Some("end_header") => break,
            Some(other) => return Err(cur.err(format!("unexpected header keyword {other}"))),
        }
    }
    let format = format.ok_or_else(|| cur.err("missing format line"))?;
    let mut out = Vec::with_capacity(elements.len());
    let mut ascii_tokens = match format {
        PlyFormat::Ascii => Some(
            std::str::from_utf8(&bytes[cur.pos..])
                .map_err(|_| cur.err("ASCII payload is not UTF-8"))?
                .split_ascii_whitespace(),
        ),
        PlyFormat::BinaryLittleEndian => None,
    };
    let payload_start = cur.pos;
    for el in elements {
        let mut data = ElementData::default();
        let nlists = el.props.iter().filter(|p| p.list.is_some()).count();
        data.lists = vec![Vec::with_capacity(el.count); nlists];
        for _ in 0..el.count {
            let mut row = Vec::with_capacity(el.props.len());
            let mut li = 0;
            for p in &el.props {
                let mut next = |kind: Scalar| -> Result<f64> {
                    match ascii_tokens.as_mut() {
                        Some(t) => t
                            .next()
                            .and_then(|s| s.parse::<f64>().ok())
                            .ok_or_else(|| Error::parse(path, payload_start as u64, "bad or missing ASCII value")),
                        None => Ok(kind.read_le(cur.take(kind.size())?)),
                    }
                };
                match p.list {
                    Some(ct) => {
                        let n = next(ct)?;
                        if !(0.0..=1e6).contains(&n) {
                            return Err(Error::parse(path, payload_start as u64, "bad list length"));
                        }
                        let mut items = Vec::with_capacity(n as usize);
                        for _ in 0..n as usize {
                            items.push(next(p.kind)?);
                        }
                        data.lists[li].push(items);
                        li += 1;
                    }
                    None => row.push(next(p.kind)?),
                }
            }
            data.scalars.push(row);
        }
        out.push((el, data));
    }
    Ok(out)
}

fn scalar_index(el: &Element, name: &str) -> Option<usize> {
    el.props
        .iter()
        .filter(|p| p.list.is_none())
        .position(|p| p.name == name)
}

fn scalars3(el: &Element, data: &ElementData, names: [&str; 3], scale: f64) -> Option<Vec<[f64; 3]>> {
    let idx: Vec<usize> = names.iter().map(|n| scalar_index(el, n)).collect::<Option<_>>()?;
    Some(
        data.scalars
            .iter()
            .map(|r| [r[idx[0]] / scale, r[idx[1]] / scale, r[idx[2]] / scale])
            .collect(),
    )
}

fn color_scale(el: &Element) -> f64 {
    match el.props.iter().find(|p| p.name == "red").map(|p| p.kind) {
        Some(Scalar::F32) | Some(Scalar::F64) => 1.0,
        Some(Scalar::U16) => 65535.0,
        _ => 255.0,
    }
}

struct VertexData {
    positions: Vec<Vec3>,
    colors: Option<Vec<[f64; 3]>>,
    normals: Option<Vec<Vec3>>,
}

fn vertex_data(path: &Path, elements: &[(Element, ElementData)]) -> Result<VertexData> {
    let (el, data) = elements
        .iter()
        .find(|(e, _)| e.name == "vertex")
        .ok_or_else(|| Error::parse(path, 0, "no vertex element"))?;
    let positions = scalars3(el, data, ["x", "y", "z"], 1.0)
        .ok_or_else(|| Error::parse(path, 0, "vertex element lacks x/y/z"))?
        .into_iter()
        .map(Vec3::from)
        .collect();
    let colors = scalars3(el, data, ["red", "green", "blue"], color_scale(el));
    let normals = scalars3(el, data, ["nx", "ny", "nz"], 1.0).map(|v| v.into_iter().map(Vec3::from).collect());
    Ok(VertexData {
        positions,
        colors,
        normals,
    })
}

pub fn read_point_cloud(path: &Path) -> Result<PointCloud> {
    let elements = parse_ply(path, &read_bytes(path)?)?;
    let v = vertex_data(path, &elements)?;
    let pc = PointCloud {
        positions: v.positions,
        colors: v.colors,
        normals: v.normals,
    };
    pc.check_invariants()?;
    Ok(pc)
}

pub fn read_mesh(path: &Path) -> Result<TriangleMesh> {
    let elements = parse_ply(path, &read_bytes(path)?)?;
    let v = vertex_data(path, &elements)?;
    let mut faces = Vec::new();
    let mut aspect = None;
    if let Some((el, data)) = elements.iter().find(|(e, _)| e.name == "face") {
        let li = el
            .props
            .iter()
            .filter(|p| p.list.is_some())
            .position(|p| p.name == "vertex_indices" || p.name == "vertex_index")
            .ok_or_else(|| Error::parse(path, 0, "face element lacks vertex_indices"))?;
        for poly in &data.lists[li] {
            if poly.len() < 3 {
                return Err(Error::parse(path, 0, "face with fewer than 3 vertices"));
            }
            // fan-triangulate polygons
            for k in 1..poly.len() - 1 {
                faces.push([poly[0] as u32, poly[k] as u32, poly[k + 1] as u32]);
            }
        }
        if let Some(ai) = scalar_index(el, "aspect") {
            if data.lists[li].iter().all(|p| p.len() == 3) {
                aspect = Some(data.scalars.iter().map(|r| r[ai]).collect());
            }
        }
    }
    let mesh = TriangleMesh {
        vertices: v.positions,
        faces,
        aspect,
        colors: v.colors,
    };
    mesh.check_invariants()?;
    Ok(mesh)
}

fn header(format: PlyFormat, lines: &[String]) -> String {
    let fmt = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    let mut s = format!("ply\nformat {fmt} 1.0\n");
    for l in lines {
        s.push_str(l);
        s.push('\n');
    }
    s.push_str("end_header\n");
    s
}

fn color_byte(c: f64) -> u8 {
    (c.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn vertex_header(n: usize, colors: bool, normals: bool) -> Vec<String> {
    let mut h = vec![
        format!("element vertex {n}"),
        "property double x".into(),
        "property double y".into(),
        "property double z".into(),
    ];
    if normals {
        h.extend([
            "property float nx".into(),
            "property float ny".into(),
            "property float nz".into(),
        ]);
    }
    if colors {
        h.extend([
            "property uchar red".into(),
            "property uchar green".into(),
            "property uchar blue".into(),
        ]);
    }
    h
}

fn write_vertices(
    buf: &mut Vec<u8>,
    format: PlyFormat,
    positions: &[Vec3],
    colors: Option<&[[f64; 3]]>,
    normals: Option<&[Vec3]>,
) {
    for (i, p) in positions.iter().enumerate() {
        match format {
            PlyFormat::Ascii => {
                let mut line = format!("{:?} {:?} {:?}", p.x, p.y, p.z);
                if let Some(n) = normals {
                    let n = n[i];
                    line.push_str(&format!(" {:?} {:?} {:?}", n.x as f32, n.y as f32, n.z as f32));
                }
                if let Some(c) = colors {
                    let c = c[i];
                    line.push_str(&format!(
                        " {} {} {}",
                        color_byte(c[0]),
                        color_byte(c[1]),
                        color_byte(c[2])
                    ));
                }
                line.push('\n');
                buf.extend_from_slice(line.as_bytes());
            }
            PlyFormat::BinaryLittleEndian => {
                for k in 0..3 {
                    buf.extend_from_slice(&p[k].to_le_bytes());
                }
                if let Some(n) = normals {
                    for k in 0..3 {
                        buf.extend_from_slice(&(n[i][k] as f32).to_le_bytes());
                    }
                }
                if let Some(c) = colors {
                    buf.extend(c[i].map(color_byte));
                }
            }
        }
    }
}

pub fn encode_point_cloud(pc: &PointCloud, format: PlyFormat) -> Vec<u8> {
    let h = vertex_header(pc.len(), pc.colors.is_some(), pc.normals.is_some());
    let mut buf = header(format, &h).into_bytes();
    write_vertices(
        &mut buf,
        format,
        &pc.positions,
        pc.colors.as_deref(),
        pc.normals.as_deref(),
    );
    buf
}

pub fn write_point_cloud(path: &Path, pc: &PointCloud, format: PlyFormat) -> Result<()> {
    write_atomic(path, &encode_point_cloud(pc, format))
}

pub fn encode_mesh(mesh: &TriangleMesh, format: PlyFormat) -> Vec<u8> {
    let mut h = vertex_header(mesh.vertices.len(), mesh.colors.is_some(), false);
    h.push(format!("element face {}", mesh.faces.len()));
    h.push("property list uchar int vertex_indices".into());
    if mesh.aspect.is_some() {
        h.push("property float aspect".into());
    }
    let mut buf = header(format, &h).into_bytes();
    write_vertices(&mut buf, format, &mesh.vertices, mesh.colors.as_deref(), None);
    for (f, face) in mesh.faces.iter().enumerate() {
        let a = mesh.aspect.as_ref().map(|a| a[f] as f32);
        match format {
            PlyFormat::Ascii => {
                let mut line = format!("3 {} {} {}", face[0], face[1], face[2]);
                if let Some(a) = a {
                    line.push_str(&format!(" {a:?}"));
                }
                line.push('\n');
                buf.extend_from_slice(line.as_bytes());
            }
            PlyFormat::BinaryLittleEndian => {
                buf.push(3);
                for k in face {
                    buf.extend_from_slice(&(*k as i32).to_le_bytes());
                }
                if let Some(a) = a {
                    buf.extend_from_slice(&a.to_le_bytes());
                }
            }
        }
    }
    buf
}

pub fn write_mesh(path: &Path, mesh: &TriangleMesh, format: PlyFormat) -> Result<()> {
    write_atomic(path, &encode_mesh(mesh, format))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::box_mesh;

    #[test]
    fn hwdm_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.hwdm");
        let d = DepthMap::from_values(3, 2, vec![1.0, 0.0, 2.5, 3.0, -1.0, 0.125]).unwrap();
        write_depth(&p, &d).unwrap();
        let bytes = read_bytes(&p).unwrap();
        assert_eq!(&bytes[..4], b"HWDM");
        assert_eq!(bytes.len(), 16 + 6 * 4);
        assert_eq!(read_depth(&p).unwrap(), d);
        std::fs::write(&p, &bytes[..20]).unwrap();
        assert!(matches!(read_depth(&p), Err(Error::Parse { .. })));
    }

    #[test]
    fn ply_round_trips_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = box_mesh(Vec3::new(-1.0, -2.0, -3.0), Vec3::new(1.0, 2.0, 3.5), true);
        m.aspect = Some((0..m.faces.len()).map(|f| f as f64 * 0.5).collect());
        m.colors = Some(vec![[1.0, 0.0, 0.2]; m.vertices.len()]);
        for fmt in [PlyFormat::Ascii, PlyFormat::BinaryLittleEndian] {
            let p = dir.path().join("m.ply");
            write_mesh(&p, &m, fmt).unwrap();
            let r = read_mesh(&p).unwrap();
            assert_eq!(r.vertices, m.vertices);
            assert_eq!(r.faces, m.faces);
            assert_eq!(r.aspect, m.aspect);
            let c = r.colors.unwrap()[0];
            assert!((c[2] - 0.2).abs() < 1.0 / 255.0);

            let pc = PointCloud {
                positions: vec![Vec3::new(0.1, 0.2, 0.3), Vec3::new(-1.0, 5.0, 1e-3)],
                colors: None,
                normals: Some(vec![Vec3::z(), Vec3::x()]),
            };
            let q = dir.path().join("p.ply");
            write_point_cloud(&q, &pc, fmt).unwrap();
            let r = read_point_cloud(&q).unwrap();
            assert_eq!(r.positions, pc.positions);
            assert_eq!(r.normals, pc.normals);
        }
    }

    #[test]
    fn ply_rejects_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.ply");
        let m = box_mesh(Vec3::zeros(), Vec3::new(1.0, 1.0, 1.0), true);
        let bytes = encode_mesh(&m, PlyFormat::BinaryLittleEndian);
        std::fs::write(&p, &bytes[..bytes.len() - 5]).unwrap();
        assert!(matches!(read_mesh(&p), Err(Error::Parse { .. })));
    }

    #[test]
    fn png_and_camera_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let img = RgbImage::from_fn(4, 3, |u, v| [u as f64 / 3.0, v as f64 / 2.0, 1.0]);
        let p = dir.path().join("a.png");
        write_png(&p, &img).unwrap();
        let r = read_png(&p).unwrap();
        for (a, b) in r.pixels.iter().zip(&img.pixels) {
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() <= 0.5 / 255.0 + 1e-12);
            }
        }
        let cam = Camera::with_fov(
            1.2,
            64,
            48,
            crate::geometry::yaw_pitch_rotation(0.3, 0.1),
            Vec3::new(1.0, 2.0, 3.0),
        )
        .unwrap();
        let c = dir.path().join("c.json");
        write_camera(&c, &cam).unwrap();
        let back = read_camera(&c).unwrap();
        assert!((back.rotation - cam.rotation).abs().max() < 1e-15);
        assert_eq!(back.translation, cam.translation);
    }
}
