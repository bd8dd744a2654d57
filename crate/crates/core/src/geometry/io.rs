//! OBJ and PLY readers/writers for meshes and point clouds.
//!
//! PLY input may be ASCII or binary little-endian. Vertex properties `x y z`
//! are required; `nx ny nz` and the `flabel` feature tag are optional. A zero
//! normal marks an unoriented point.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::{Point3, Vector3};

use super::cloud::{FeatureLabel, PointCloud};
use super::mesh::TriangleMesh;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyEncoding {
    Ascii,
    BinaryLittleEndian,
}

fn parse_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default()
}

pub fn read_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    match extension(path).as_str() {
        "obj" => {
            let (v, f) = parse_obj(reader, path)?;
            TriangleMesh::new(v, f)
        }
        "ply" => {
            let ply = parse_ply(reader, path)?;
            TriangleMesh::new(ply.cloud.points().to_vec(), ply.faces)
        }
        other => Err(parse_err(path, format!("unsupported mesh extension {other:?}"))),
    }
}

/// Reads points (and normals/labels when present) from PLY or OBJ vertices.
pub fn read_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    match extension(path).as_str() {
        "obj" => Ok(PointCloud::new(parse_obj(reader, path)?.0)),
        "ply" => Ok(parse_ply(reader, path)?.cloud),
        other => Err(parse_err(path, format!("unsupported cloud extension {other:?}"))),
    }
}

pub fn write_mesh(path: impl AsRef<Path>, mesh: &TriangleMesh) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path)?);
    match extension(path).as_str() {
        "obj" => write_obj(&mut w, mesh)?,
        "ply" => write_mesh_ply(&mut w, mesh)?,
        other => return Err(parse_err(path, format!("unsupported mesh extension {other:?}"))),
    }
    w.flush()?;
    Ok(())
}

pub fn write_cloud(path: impl AsRef<Path>, cloud: &PointCloud, encoding: PlyEncoding) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    write_cloud_ply(&mut w, cloud, encoding)?;
    w.flush()?;
    Ok(())
}

pub fn parse_obj<R: BufRead>(reader: R, path: &Path) -> Result<(Vec<Point3<f64>>, Vec<[usize; 3]>)> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let c: Vec<f64> = tok
                    .take(3)
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| parse_err(path, format!("line {}: {e}", lineno + 1)))?;
                if c.len() != 3 {
                    return Err(parse_err(path, format!("line {}: vertex needs 3 coordinates", lineno + 1)));
                }
                vertices.push(Point3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let mut idx = Vec::new();
                for t in tok {
                    let first = t.split('/').next().unwrap_or("");
                    let i: i64 = first
                        .parse()
                        .map_err(|e| parse_err(path, format!("line {}: {e}", lineno + 1)))?;
                    let resolved = if i > 0 {
                        i - 1
                    } else if i < 0 {
                        vertices.len() as i64 + i
                    } else {
                        -1
                    };
                    if resolved < 0 {
                        return Err(parse_err(path, format!("line {}: bad vertex index {i}", lineno + 1)));
                    }
                    idx.push(resolved as usize);
                }
                if idx.len() < 3 {
                    return Err(parse_err(path, format!("line {}: face needs 3 vertices", lineno + 1)));
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok((vertices, faces))
}

pub fn write_obj<W: Write>(w: &mut W, mesh: &TriangleMesh) -> Result<()> {
    for v in mesh.vertices() {
        writeln!(w, "v {} {} {}", v.x, v.y, v.z)?;
    }
    for f in mesh.faces() {
        writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    Ok(())
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

    fn read_binary<R: Read>(self, r: &mut R) -> std::io::Result<f64> {
        Ok(match self {
            Scalar::I8 => r.read_i8()? as f64,
            Scalar::U8 => r.read_u8()? as f64,
            Scalar::I16 => r.read_i16::<LittleEndian>()? as f64,
            Scalar::U16 => r.read_u16::<LittleEndian>()? as f64,
            Scalar::I32 => r.read_i32::<LittleEndian>()? as f64,
            Scalar::U32 => r.read_u32::<LittleEndian>()? as f64,
            Scalar::F32 => r.read_f32::<LittleEndian>()? as f64,
            Scalar::F64 => r.read_f64::<LittleEndian>()?,
        })
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

pub struct PlyData {
    pub cloud: PointCloud,
    pub faces: Vec<[usize; 3]>,
}

/// Token source over either ASCII body lines or a binary stream.
enum Body<R: BufRead> {
    Ascii { lines: std::io::Lines<R>, pending: Vec<String> },
    Binary(R),
}

impl<R: BufRead> Body<R> {
    fn next(&mut self, ty: Scalar, path: &Path) -> Result<f64> {
        match self {
            Body::Binary(r) => ty
                .read_binary(r)
                .map_err(|e| parse_err(path, format!("truncated binary body: {e}"))),
            Body::Ascii { lines, pending } => {
                while pending.is_empty() {
                    let line = lines
                        .next()
                        .ok_or_else(|| parse_err(path, "unexpected end of ASCII body"))??;
                    pending.extend(line.split_whitespace().rev().map(str::to_owned));
                }
                let t = pending.pop().unwrap();
                t.parse::<f64>()
                    .map_err(|e| parse_err(path, format!("bad number {t:?}: {e}")))
            }
        }
    }
}

pub fn parse_ply<R: BufRead>(mut reader: R, path: &Path) -> Result<PlyData> {
    let mut line = String::new();
    reader.read_line(&mut line)?;
    if line.trim_end() != "ply" {
        return Err(parse_err(path, "missing 'ply' magic"));
    }
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Err(parse_err(path, "header not terminated"));
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["end_header"] => break,
            ["format", "ascii", _] => encoding = Some(PlyEncoding::Ascii),
            ["format", "binary_little_endian", _] => encoding = Some(PlyEncoding::BinaryLittleEndian),
            ["format", other, ..] => {
                return Err(parse_err(path, format!("unsupported PLY format {other}")));
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|e| parse_err(path, format!("bad element count: {e}")))?,
                props: Vec::new(),
            }),
            ["property", "list", len_ty, item_ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(path, "property before element"))?;
                let lt = Scalar::parse(len_ty).ok_or_else(|| parse_err(path, format!("bad type {len_ty}")))?;
                let it = Scalar::parse(item_ty).ok_or_else(|| parse_err(path, format!("bad type {item_ty}")))?;
                el.props.push(Property::List(name.to_string(), lt, it));
            }
            ["property", ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(path, "property before element"))?;
                let t = Scalar::parse(ty).ok_or_else(|| parse_err(path, format!("bad type {ty}")))?;
                el.props.push(Property::Scalar(name.to_string(), t));
            }
            _ => return Err(parse_err(path, format!("unrecognized header line {:?}", line.trim_end()))),
        }
    }
    let encoding = encoding.ok_or_else(|| parse_err(path, "missing format line"))?;
    let mut body = match encoding {
        PlyEncoding::Ascii => Body::Ascii {
            lines: reader.lines(),
            pending: Vec::new(),
        },
        PlyEncoding::BinaryLittleEndian => Body::Binary(reader),
    };

    let mut points = Vec::new();
    let mut normals: Vec<Option<Vector3<f64>>> = Vec::new();
    let mut labels = Vec::new();
    let mut faces = Vec::new();
    let mut has_normals = false;
    let mut has_labels = false;
    for el in &elements {
        let find = |n: &str| {
            el.props
                .iter()
                .position(|p| matches!(p, Property::Scalar(name, _) if name == n))
        };
        let (xi, yi, zi) = (find("x"), find("y"), find("z"));
        let (nxi, nyi, nzi) = (find("nx"), find("ny"), find("nz"));
        let li = find("flabel");
        if el.name == "vertex" {
            if xi.is_none() || yi.is_none() || zi.is_none() {
                return Err(parse_err(path, "vertex element lacks x/y/z"));
            }
            has_normals = nxi.is_some() && nyi.is_some() && nzi.is_some();
            has_labels = li.is_some();
        }
        let mut values = vec![0.0; el.props.len()];
        for _ in 0..el.count {
            let mut list: Vec<usize> = Vec::new();
            for (k, prop) in el.props.iter().enumerate() {
                match prop {
                    Property::Scalar(_, t) => values[k] = body.next(*t, path)?,
                    Property::List(name, lt, it) => {
                        let len = body.next(*lt, path)? as usize;
                        let keep = el.name == "face" && (name == "vertex_indices" || name == "vertex_index");
                        for _ in 0..len {
                            let v = body.next(*it, path)?;
                            if keep {
                                list.push(v as usize);
                            }
                        }
                    }
                }
            }
            match el.name.as_str() {
                "vertex" => {
                    points.push(Point3::new(values[xi.unwrap()], values[yi.unwrap()], values[zi.unwrap()]));
                    if has_normals {
                        let n = Vector3::new(values[nxi.unwrap()], values[nyi.unwrap()], values[nzi.unwrap()]);
                        let norm = n.norm();
                        normals.push((norm > 1e-12 && norm.is_finite()).then(|| n / norm));
                    }
                    if let Some(li) = li {
                        let code = values[li] as u8;
                        labels.push(
                            FeatureLabel::from_code(code)
                                .ok_or_else(|| parse_err(path, format!("bad flabel {code}")))?,
                        );
                    }
                }
                "face" => {
                    if list.len() >= 3 {
                        for k in 1..list.len() - 1 {
                            faces.push([list[0], list[k], list[k + 1]]);
                        }
                    }
                }
                _ => {}
            }
        }
    }
    let mut cloud = PointCloud::new(points);
    if has_normals {
        cloud = cloud.with_optional_normals(normals)?;
    }
    if has_labels {
        cloud = cloud.with_labels(labels)?;
    }
    Ok(PlyData { cloud, faces })
}

fn write_header<W: Write>(w: &mut W, encoding: PlyEncoding) -> std::io::Result<()> {
    writeln!(w, "ply")?;
    match encoding {
        PlyEncoding::Ascii => writeln!(w, "format ascii 1.0"),
        PlyEncoding::BinaryLittleEndian => writeln!(w, "format binary_little_endian 1.0"),
    }
}

/// Writes `x y z` as doubles, `nx ny nz` as floats when the cloud has normals
/// (zero for unoriented points) and `flabel` as uchar when it has labels.
pub fn write_cloud_ply<W: Write>(w: &mut W, cloud: &PointCloud, encoding: PlyEncoding) -> Result<()> {
    let has_n = cloud.normals().is_some();
    let has_l = cloud.labels().is_some();
    write_header(w, encoding)?;
    writeln!(w, "element vertex {}", cloud.len())?;
    for c in ["x", "y", "z"] {
        writeln!(w, "property double {c}")?;
    }
    if has_n {
        for c in ["nx", "ny", "nz"] {
            writeln!(w, "property float {c}")?;
        }
    }
    if has_l {
        writeln!(w, "property uchar flabel")?;
    }
    writeln!(w, "end_header")?;
    for (i, p) in cloud.points().iter().enumerate() {
        let n = cloud.normal(i).unwrap_or_else(Vector3::zeros);
        let l = cloud.label(i).code();
        match encoding {
            PlyEncoding::Ascii => {
                write!(w, "{} {} {}", p.x, p.y, p.z)?;
                if has_n {
                    write!(w, " {} {} {}", n.x as f32, n.y as f32, n.z as f32)?;
                }
                if has_l {
                    write!(w, " {l}")?;
                }
                writeln!(w)?;
            }
            PlyEncoding::BinaryLittleEndian => {
                for c in [p.x, p.y, p.z] {
                    w.write_f64::<LittleEndian>(c)?;
                }
                if has_n {
                    for c in [n.x, n.y, n.z] {
                        w.write_f32::<LittleEndian>(c as f32)?;
                    }
                }
                if has_l {
                    w.write_u8(l)?;
                }
            }
        }
    }
    Ok(())
}

pub fn write_mesh_ply<W: Write>(w: &mut W, mesh: &TriangleMesh) -> Result<()> {
    write_header(w, PlyEncoding::BinaryLittleEndian)?;
    writeln!(w, "element vertex {}", mesh.vertices().len())?;
    for c in ["x", "y", "z"] {
        writeln!(w, "property double {c}")?;
    }
    writeln!(w, "element face {}", mesh.faces().len())?;
    writeln!(w, "property list uchar uint vertex_indices")?;
    writeln!(w, "end_header")?;
    for v in mesh.vertices() {
        for c in [v.x, v.y, v.z] {
            w.write_f64::<LittleEndian>(c)?;
        }
    }
    for f in mesh.faces() {
        w.write_u8(3)?;
        for &i in f {
            w.write_u32::<LittleEndian>(i as u32)?;
        }
    }
    Ok(())
}

/// Lists readable mesh files (`.obj`, `.ply`) in a directory, sorted by name.
pub fn list_mesh_files(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir.as_ref())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && matches!(extension(p).as_str(), "obj" | "ply"))
        .collect();
    files.sort();
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives;
    use std::io::Cursor;

    fn p() -> &'static Path {
        Path::new("mem")
    }

    #[test]
    fn obj_round_trip_and_polygon_fan() {
        let mesh = primitives::cube(1.0);
        let mut buf = Vec::new();
        write_obj(&mut buf, &mesh).unwrap();
        let (v, f) = parse_obj(Cursor::new(buf), p()).unwrap();
        assert_eq!(v, mesh.vertices());
        assert_eq!(f, mesh.faces());

        let quad = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1/1 2/2/2 3//3 -1\n";
        let (_, f) = parse_obj(Cursor::new(quad), p()).unwrap();
        assert_eq!(f, vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn ply_cloud_round_trip_both_encodings() {
        let cloud = PointCloud::new(vec![Point3::new(0.1, 0.2, 0.3), Point3::new(-1.0, 2.5, 1e-7)])
            .with_optional_normals(vec![Some(Vector3::z()), None])
            .unwrap()
            .with_labels(vec![FeatureLabel::Corner, FeatureLabel::Regular])
            .unwrap();
        for enc in [PlyEncoding::Ascii, PlyEncoding::BinaryLittleEndian] {
            let mut buf = Vec::new();
            write_cloud_ply(&mut buf, &cloud, enc).unwrap();
            let back = parse_ply(Cursor::new(buf), p()).unwrap().cloud;
            assert_eq!(back.points(), cloud.points());
            assert_eq!(back.normals(), cloud.normals());
            assert_eq!(back.labels(), cloud.labels());
        }
    }

    #[test]
    fn ply_mesh_with_extra_properties() {
        let text = "ply\nformat ascii 1.0\ncomment hi\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nproperty uchar red\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0 255\n1 0 0 0\n0 1 0 7\n3 0 1 2\n";
        let data = parse_ply(Cursor::new(text), p()).unwrap();
        assert_eq!(data.cloud.len(), 3);
        assert_eq!(data.faces, vec![[0, 1, 2]]);
        assert!(data.cloud.normals().is_none());
    }

    #[test]
    fn binary_mesh_round_trip() {
        let mesh = primitives::icosphere(1.0, 1);
        let mut buf = Vec::new();
        write_mesh_ply(&mut buf, &mesh).unwrap();
        let data = parse_ply(Cursor::new(buf), p()).unwrap();
        assert_eq!(data.cloud.points(), mesh.vertices());
        assert_eq!(data.faces, mesh.faces());
    }

    #[test]
    fn malformed_inputs_are_errors() {
        assert!(parse_ply(Cursor::new("plx\n"), p()).is_err());
        let truncated = "ply\nformat binary_little_endian 1.0\nelement vertex 2\nproperty double x\nproperty double y\nproperty double z\nend_header\n";
        assert!(parse_ply(Cursor::new(truncated), p()).is_err());
        assert!(parse_obj(Cursor::new("v 1 2\n"), p()).is_err());
        assert!(parse_obj(Cursor::new("v 0 0 0\nf 1 0 1\n"), p()).is_err());
    }
}
