use std::collections::HashMap;

use log::warn;
use nalgebra::{Point3, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, SpatialIndex, TriangleMesh};

/// Oriented points blended per implicit-function evaluation.
const IMPLICIT_K: usize = 8;
/// Padding around the oriented points' bounding box, in cells.
const PAD_CELLS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshParams {
    /// Cells along the longest side of the padded bounding box.
    pub grid_res: usize,
    /// Level set extracted, in world units (positive grows the surface).
    pub iso_offset: f64,
}

impl Default for MeshParams {
    fn default() -> Self {
        Self {
            grid_res: 128,
            iso_offset: 0.0,
        }
    }
}

/// Signed distance to the Gaussian-blended tangent planes of the nearest
/// oriented points. Positive outside (along the normals).
pub struct OrientedImplicit {
    points: Vec<Point3<f64>>,
    normals: Vec<Vector3<f64>>,
    index: SpatialIndex,
}

impl OrientedImplicit {
    pub fn new(cloud: &PointCloud) -> Result<Self> {
        let (points, normals): (Vec<_>, Vec<_>) = (0..cloud.len())
            .filter_map(|i| cloud.normal(i).map(|n| (cloud.points()[i], n)))
            .unzip();
        if points.is_empty() {
            return Err(Error::CannotOrient);
        }
        let index = SpatialIndex::from_points(&points);
        Ok(Self { points, normals, index })
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn value(&self, x: &Point3<f64>) -> f64 {
        let nn = self.index.knn_point(x, IMPLICIT_K);
        let sigma2 = nn.last().map_or(0.0, |&(_, d)| d * d).max(1e-300);
        let (mut num, mut den) = (0.0, 0.0);
        for (j, d) in nn {
            let w = (-d * d / sigma2).exp();
            num += w * self.normals[j].dot(&(x - self.points[j]));
            den += w;
        }
        num / den
    }

    /// Distance from `x` to the nearest oriented point.
    pub fn support_distance(&self, x: &Point3<f64>) -> f64 {
        self.index.nearest_point(x).map_or(f64::INFINITY, |(_, d)| d)
    }
}

/// The six tetrahedra of a cube, all sharing the 0–6 diagonal. Neighboring
/// cubes split their shared faces along the same diagonal.
const CUBE_TETS: [[usize; 4]; 6] = [
    [0, 6, 1, 2],
    [0, 6, 2, 3],
    [0, 6, 3, 7],
    [0, 6, 7, 4],
    [0, 6, 4, 5],
    [0, 6, 5, 1],
];
const CORNERS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

struct Grid {
    origin: Point3<f64>,
    cell: f64,
    /// Vertices per axis.
    dims: [usize; 3],
}

impl Grid {
    fn id(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims[1] + j) * self.dims[0] + i
    }

    fn position(&self, id: usize) -> Point3<f64> {
        let i = id % self.dims[0];
        let j = (id / self.dims[0]) % self.dims[1];
        let k = id / (self.dims[0] * self.dims[1]);
        self.origin + self.cell * Vector3::new(i as f64, j as f64, k as f64)
    }
}

/// A triangle whose corners are zero crossings on grid edges, keyed by the
/// edge's end vertices.
type EdgeTriangle = [(usize, usize); 3];

/// Polygonizes the zero set of the oriented-point implicit function with
/// marching tetrahedra (six per grid cube) over the padded bounding box of
/// the oriented points. Only grid vertices near the data are evaluated, so
/// open surfaces are not closed off far from the samples. Triangles face
/// the positive side.
pub fn reconstruct_mesh(cloud: &PointCloud, params: &MeshParams) -> Result<TriangleMesh> {
    if cloud.is_empty() {
        return Err(Error::EmptyInput("cloud has no points"));
    }
    if params.grid_res < 2 {
        return Err(Error::InvalidParameter(format!("grid resolution must be ≥ 2, got {}", params.grid_res)));
    }
    let implicit = OrientedImplicit::new(cloud)?;
    let oriented = implicit.points().len();
    if 10 * oriented < 9 * cloud.len() {
        warn!("meshing from {oriented} of {} points; the rest carry no normal", cloud.len());
    }
    let (lo, hi) = crate::geometry::cloud::bounding_box(implicit.points()).expect("non-empty");
    let extent = (hi - lo).max().max(1e-12);
    let cell = extent / (params.grid_res as f64 - 2.0 * PAD_CELLS).max(1.0);
    let origin = lo - Vector3::repeat(PAD_CELLS * cell);
    let dims = [0, 1, 2].map(|a| ((hi[a] - lo[a]) / cell + 2.0 * PAD_CELLS).ceil() as usize + 1);
    let grid = Grid { origin, cell, dims };

    let band = 3.0 * cell * 3f64.sqrt() + typical_spacing(&implicit);
    let near = band_mask(&grid, implicit.points(), band);
    let values: Vec<f64> = (0..near.len())
        .into_par_iter()
        .map(|id| {
            if near[id] {
                implicit.value(&grid.position(id)) - params.iso_offset
            } else {
                f64::NAN
            }
        })
        .collect();

    let slabs: Vec<Vec<EdgeTriangle>> = (0..dims[2] - 1)
        .into_par_iter()
        .map(|k| polygonize_slab(&grid, &values, k))
        .collect();

    let mut vertex_of: HashMap<(usize, usize), usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for tri in slabs.into_iter().flatten() {
        let face = tri.map(|(a, b)| {
            *vertex_of.entry((a, b)).or_insert_with(|| {
                vertices.push(crossing(&grid, &values, a, b));
                vertices.len() - 1
            })
        });
        faces.push(face);
    }
    if faces.is_empty() {
        return Err(Error::EmptyInput("implicit function has no zero crossing"));
    }
    TriangleMesh::new(vertices, faces)
}

/// Grid vertices within `band` of some point.
fn band_mask(grid: &Grid, points: &[Point3<f64>], band: f64) -> Vec<bool> {
    let mut near = vec![false; grid.dims.iter().product()];
    let b2 = band * band;
    for p in points {
        let rel = (p - grid.origin) / grid.cell;
        let span = band / grid.cell;
        let range = |a: usize| {
            let lo = (rel[a] - span).ceil().max(0.0) as usize;
            let hi = ((rel[a] + span).floor() as isize).min(grid.dims[a] as isize - 1);
            lo..(hi + 1).max(0) as usize
        };
        for k in range(2) {
            for j in range(1) {
                for i in range(0) {
                    let id = grid.id(i, j, k);
                    if !near[id] && (grid.position(id) - p).norm_squared() <= b2 {
                        near[id] = true;
                    }
                }
            }
        }
    }
    near
}

/// Mean distance from an oriented point to its `IMPLICIT_K`-th neighbor,
/// estimated on a strided subset.
fn typical_spacing(implicit: &OrientedImplicit) -> f64 {
    let pts = implicit.points();
    let stride = (pts.len() / 1000).max(1);
    let picks: Vec<usize> = (0..pts.len()).step_by(stride).collect();
    let sum: f64 = picks
        .iter()
        .map(|&i| implicit.index.knn_point(&pts[i], IMPLICIT_K + 1).last().map_or(0.0, |&(_, d)| d))
        .sum();
    sum / picks.len() as f64
}

fn crossing(grid: &Grid, values: &[f64], a: usize, b: usize) -> Point3<f64> {
    let (fa, fb) = (values[a], values[b]);
    let t = fa / (fa - fb);
    let (pa, pb) = (grid.position(a), grid.position(b));
    pa + t * (pb - pa)
}

fn polygonize_slab(grid: &Grid, values: &[f64], k: usize) -> Vec<EdgeTriangle> {
    let mut out = Vec::new();
    for j in 0..grid.dims[1] - 1 {
        for i in 0..grid.dims[0] - 1 {
            let ids = CORNERS.map(|[di, dj, dk]| grid.id(i + di, j + dj, k + dk));
            let f = ids.map(|id| values[id]);
            if f.iter().any(|v| v.is_nan()) {
                continue;
            }
            if f.iter().all(|&v| v < 0.0) || f.iter().all(|&v| v >= 0.0) {
                continue;
            }
            for tet in CUBE_TETS {
                let v = tet.map(|c| ids[c]);
                polygonize_tet(grid, values, v, &mut out);
            }
        }
    }
    out
}

fn polygonize_tet(grid: &Grid, values: &[f64], v: [usize; 4], out: &mut Vec<EdgeTriangle>) {
    let inside: Vec<usize> = (0..4).filter(|&c| values[v[c]] < 0.0).collect();
    let outside: Vec<usize> = (0..4).filter(|&c| values[v[c]] >= 0.0).collect();
    let key = |a: usize, b: usize| {
        let (a, b) = (v[a], v[b]);
        if a < b {
            (a, b)
        } else {
            (b, a)
        }
    };
    let mut emit = |tri: EdgeTriangle, positive: usize| {
        let p = tri.map(|(a, b)| crossing(grid, values, a, b));
        let normal = (p[1] - p[0]).cross(&(p[2] - p[0]));
        if normal.dot(&(grid.position(v[positive]) - p[0])) < 0.0 {
            out.push([tri[0], tri[2], tri[1]]);
        } else {
            out.push(tri);
        }
    };
    match (inside.len(), outside.len()) {
        (1, 3) => {
            let a = inside[0];
            emit([key(a, outside[0]), key(a, outside[1]), key(a, outside[2])], outside[0]);
        }
        (3, 1) => {
            let a = outside[0];
            emit([key(a, inside[0]), key(a, inside[1]), key(a, inside[2])], a);
        }
        (2, 2) => {
            let (a, b) = (inside[0], inside[1]);
            let (c, d) = (outside[0], outside[1]);
            // quad a-c, a-d, b-d, b-c
            emit([key(a, c), key(a, d), key(b, d)], c);
            emit([key(a, c), key(b, d), key(b, c)], c);
        }
        _ => {}
    }
}
