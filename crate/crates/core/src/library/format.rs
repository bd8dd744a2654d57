//! Binary library file, little-endian throughout.
//!
//! ```text
//! "EXPL"  u32 version=1
//! f64 radius_rel  u32 moment_order  u64 prior_count  u64 exemplar_count
//! per prior:
//!   u64 id  u64 model_id  f64×3 center
//!   f64×9 rotation (row-major)  f64×3 translation  f64 scale
//!   u32 point_count
//!   per point: f32×3 position  f32×3 normal  u8 label  f32 weight
//!   f64×descriptor_len descriptor
//! u64×exemplar_count exemplar ids
//! ```
//! A zero normal marks an unoriented point.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use nalgebra::{Matrix3, Point3, Vector3};

use super::{descriptor_len, Descriptor, Prior, PriorLibrary};
use crate::error::{Error, Result};
use crate::geometry::{FeatureLabel, PointCloud, SimilarityTransform};

pub const MAGIC: &[u8; 4] = b"EXPL";
pub const VERSION: u32 = 1;

pub fn save_library(lib: &PriorLibrary, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_library(&mut w, lib)?;
    w.flush()?;
    Ok(())
}

pub fn load_library(path: impl AsRef<Path>) -> Result<PriorLibrary> {
    let mut r = BufReader::new(File::open(path)?);
    read_library(&mut r)
}

pub fn write_library<W: Write>(w: &mut W, lib: &PriorLibrary) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_u32::<LE>(VERSION)?;
    w.write_f64::<LE>(lib.radius_rel())?;
    w.write_u32::<LE>(lib.moment_order())?;
    w.write_u64::<LE>(lib.priors().len() as u64)?;
    w.write_u64::<LE>(lib.exemplar_ids().len() as u64)?;
    for p in lib.priors() {
        w.write_u64::<LE>(p.id)?;
        w.write_u64::<LE>(p.model_id)?;
        for c in p.center.iter() {
            w.write_f64::<LE>(*c)?;
        }
        let r = p.to_world.rotation();
        for i in 0..3 {
            for j in 0..3 {
                w.write_f64::<LE>(r[(i, j)])?;
            }
        }
        for c in p.to_world.translation().iter() {
            w.write_f64::<LE>(*c)?;
        }
        w.write_f64::<LE>(p.to_world.scale())?;
        w.write_u32::<LE>(p.points.len() as u32)?;
        for (i, pt) in p.points.points().iter().enumerate() {
            for c in pt.iter() {
                w.write_f32::<LE>(*c as f32)?;
            }
            let n = p.points.normal(i).unwrap_or_else(Vector3::zeros);
            for c in n.iter() {
                w.write_f32::<LE>(*c as f32)?;
            }
            w.write_u8(p.points.label(i).code())?;
            w.write_f32::<LE>(p.points.weight(i) as f32)?;
        }
        for v in p.descriptor.values() {
            w.write_f64::<LE>(*v)?;
        }
    }
    for id in lib.exemplar_ids() {
        w.write_u64::<LE>(*id)?;
    }
    Ok(())
}

fn corrupt(e: std::io::Error) -> Error {
    if e.kind() == ErrorKind::UnexpectedEof {
        Error::CorruptLibrary("file is truncated".into())
    } else {
        Error::Io(e)
    }
}

pub fn read_library<R: Read>(r: &mut R) -> Result<PriorLibrary> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(corrupt)?;
    if &magic != MAGIC {
        return Err(Error::CorruptLibrary(format!("bad magic {magic:?}")));
    }
    let version = r.read_u32::<LE>().map_err(corrupt)?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            expected: VERSION,
        });
    }
    let radius_rel = r.read_f64::<LE>().map_err(corrupt)?;
    let order = r.read_u32::<LE>().map_err(corrupt)?;
    if order == 0 || order > 32 {
        return Err(Error::CorruptLibrary(format!("moment order {order}")));
    }
    let prior_count = r.read_u64::<LE>().map_err(corrupt)?;
    let exemplar_count = r.read_u64::<LE>().map_err(corrupt)?;
    let dlen = descriptor_len(order);
    let mut priors = Vec::new();
    for _ in 0..prior_count {
        priors.push(read_prior(r, dlen)?);
    }
    let mut exemplars = Vec::new();
    for _ in 0..exemplar_count {
        exemplars.push(r.read_u64::<LE>().map_err(corrupt)?);
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::CorruptLibrary("trailing bytes after exemplar list".into()));
    }
    let mut lib = PriorLibrary::new(radius_rel, order, priors).map_err(|e| Error::CorruptLibrary(e.to_string()))?;
    lib.set_exemplars(exemplars)
        .map_err(|e| Error::CorruptLibrary(e.to_string()))?;
    Ok(lib)
}

fn read_prior<R: Read>(r: &mut R, dlen: usize) -> Result<Prior> {
    let f64s = |r: &mut R, n: usize| -> Result<Vec<f64>> {
        (0..n).map(|_| r.read_f64::<LE>().map_err(corrupt)).collect()
    };
    let id = r.read_u64::<LE>().map_err(corrupt)?;
    let model_id = r.read_u64::<LE>().map_err(corrupt)?;
    let c = f64s(r, 3)?;
    let rot = f64s(r, 9)?;
    let t = f64s(r, 3)?;
    let scale = r.read_f64::<LE>().map_err(corrupt)?;
    let to_world = SimilarityTransform::new(
        Matrix3::from_row_slice(&rot),
        Vector3::new(t[0], t[1], t[2]),
        scale,
    )
    .map_err(|e| Error::CorruptLibrary(format!("prior {id}: {e}")))?;
    let count = r.read_u32::<LE>().map_err(corrupt)? as usize;
    let mut pts = Vec::with_capacity(count);
    let mut normals = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    let mut weights = Vec::with_capacity(count);
    for _ in 0..count {
        let mut v = [0f64; 7];
        for slot in v.iter_mut().take(6) {
            *slot = r.read_f32::<LE>().map_err(corrupt)? as f64;
        }
        let code = r.read_u8().map_err(corrupt)?;
        labels.push(FeatureLabel::from_code(code).ok_or_else(|| Error::CorruptLibrary(format!("label code {code}")))?);
        v[6] = r.read_f32::<LE>().map_err(corrupt)? as f64;
        pts.push(Point3::new(v[0], v[1], v[2]));
        let n = Vector3::new(v[3], v[4], v[5]);
        normals.push((n != Vector3::zeros()).then_some(n));
        weights.push(v[6]);
    }
    let points = PointCloud::new(pts)
        .with_optional_normals(normals)
        .and_then(|c| c.with_labels(labels))
        .and_then(|c| c.with_weights(weights))
        .map_err(|e| Error::CorruptLibrary(format!("prior {id}: {e}")))?;
    let descriptor = Descriptor::new(f64s(r, dlen)?);
    Ok(Prior {
        id,
        model_id,
        center: Point3::new(c[0], c[1], c[2]),
        points,
        to_world,
        descriptor,
    })
}
