//! Area-uniform surface sampling with sharp-feature labels.

use std::collections::BTreeMap;

use nalgebra::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::cloud::{FeatureLabel, PointCloud};
use super::mesh::{point_segment_distance, TriangleMesh};
use super::spatial::SpatialIndex;
use crate::error::Result;

/// Thresholds for tagging sampled points as edge or corner points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelConfig {
    /// An interior edge is sharp when its dihedral angle exceeds this (degrees).
    pub dihedral_deg: f64,
    /// Feature band as a fraction of the mesh bounding diagonal.
    pub band_rel: f64,
    /// Treat open boundary edges as sharp.
    pub boundary_is_sharp: bool,
}

impl Default for LabelConfig {
    fn default() -> Self {
        Self {
            dihedral_deg: 30.0,
            band_rel: 0.01,
            boundary_is_sharp: true,
        }
    }
}

/// Sharp edges and corner vertices of a mesh.
#[derive(Debug, Clone, Default)]
pub struct SharpFeatures {
    pub edges: Vec<[usize; 2]>,
    pub corners: Vec<usize>,
}

pub fn sharp_features(mesh: &TriangleMesh, config: &LabelConfig) -> SharpFeatures {
    let mut edge_faces: BTreeMap<[usize; 2], Vec<usize>> = BTreeMap::new();
    for (fi, f) in mesh.faces().iter().enumerate() {
        if mesh.is_degenerate(fi) {
            continue;
        }
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            edge_faces.entry([a.min(b), a.max(b)]).or_default().push(fi);
        }
    }
    let cos_limit = config.dihedral_deg.to_radians().cos();
    let mut edges = Vec::new();
    let mut incident = vec![0usize; mesh.vertices().len()];
    for (edge, faces) in &edge_faces {
        let sharp = match faces.as_slice() {
            [_] => config.boundary_is_sharp,
            [f0, f1] => mesh.face_normal(*f0).dot(&mesh.face_normal(*f1)) < cos_limit,
            _ => true,
        };
        if sharp {
            edges.push(*edge);
            incident[edge[0]] += 1;
            incident[edge[1]] += 1;
        }
    }
    let corners = incident
        .iter()
        .enumerate()
        .filter(|(_, c)| **c >= 3)
        .map(|(v, _)| v)
        .collect();
    SharpFeatures { edges, corners }
}

/// Labels arbitrary points against the sharp features of `mesh`.
pub struct FeatureLabeler<'a> {
    mesh: &'a TriangleMesh,
    features: SharpFeatures,
    edge_index: SpatialIndex,
    corner_index: SpatialIndex,
    max_half_edge: f64,
    band: f64,
}

impl<'a> FeatureLabeler<'a> {
    pub fn new(mesh: &'a TriangleMesh, config: &LabelConfig) -> Self {
        let features = sharp_features(mesh, config);
        let v = mesh.vertices();
        let mids: Vec<Point3<f64>> = features
            .edges
            .iter()
            .map(|[a, b]| nalgebra::center(&v[*a], &v[*b]))
            .collect();
        let max_half_edge = features
            .edges
            .iter()
            .map(|[a, b]| 0.5 * (v[*a] - v[*b]).norm())
            .fold(0.0, f64::max);
        let corner_pts: Vec<Point3<f64>> = features.corners.iter().map(|&c| v[c]).collect();
        Self {
            mesh,
            edge_index: SpatialIndex::from_points(&mids),
            corner_index: SpatialIndex::from_points(&corner_pts),
            features,
            max_half_edge,
            band: config.band_rel * mesh.bounding_diagonal(),
        }
    }

    pub fn features(&self) -> &SharpFeatures {
        &self.features
    }

    pub fn label(&self, p: &Point3<f64>) -> FeatureLabel {
        if !self.corner_index.within_radius_point(p, self.band).is_empty() {
            return FeatureLabel::Corner;
        }
        let v = self.mesh.vertices();
        let near = self
            .edge_index
            .within_radius_point(p, self.band + self.max_half_edge);
        if near.into_iter().any(|e| {
            let [a, b] = self.features.edges[e];
            point_segment_distance(p, &v[a], &v[b]) <= self.band
        }) {
            FeatureLabel::Edge
        } else {
            FeatureLabel::Regular
        }
    }
}

/// Draws `count` area-uniform surface points as `(face, position)` pairs.
pub(crate) fn sample_surface(
    mesh: &TriangleMesh,
    count: usize,
    rng: &mut impl Rng,
) -> Result<Vec<(usize, Point3<f64>)>> {
    mesh.ensure_samplable()?;
    let mut cumulative = Vec::with_capacity(mesh.faces().len());
    let mut total = 0.0;
    for f in 0..mesh.faces().len() {
        total += mesh.face_area(f);
        cumulative.push(total);
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let target = rng.random::<f64>() * total;
        let mut f = cumulative.partition_point(|&c| c <= target);
        if f >= cumulative.len() {
            f = cumulative.len() - 1;
        }
        // skip zero-area faces that share a cumulative value
        while mesh.is_degenerate(f) {
            f = if f + 1 < cumulative.len() { f + 1 } else { 0 };
        }
        let [a, b, c] = mesh.triangle(f);
        let s = rng.random::<f64>().sqrt();
        let t = rng.random::<f64>();
        let p = Point3::from(a.coords * (1.0 - s) + b.coords * (s * (1.0 - t)) + c.coords * (s * t));
        out.push((f, p));
    }
    Ok(out)
}

pub fn sample_mesh(mesh: &TriangleMesh, count: usize, seed: u64) -> Result<PointCloud> {
    sample_mesh_with(mesh, count, seed, &LabelConfig::default())
}

/// Samples `count` points uniformly by area. Each point carries its source
/// face normal, a feature label and a weight proportional to the source face
/// area (rescaled so the weights average one).
pub fn sample_mesh_with(
    mesh: &TriangleMesh,
    count: usize,
    seed: u64,
    labels: &LabelConfig,
) -> Result<PointCloud> {
    if count == 0 {
        return Err(crate::Error::InvalidParameter("sample count must be ≥ 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = sample_surface(mesh, count, &mut rng)?;
    let labeler = FeatureLabeler::new(mesh, labels);
    let mean_area = samples.iter().map(|(f, _)| mesh.face_area(*f)).sum::<f64>() / count as f64;
    let points = samples.iter().map(|(_, p)| *p).collect();
    let normals = samples.iter().map(|(f, _)| mesh.face_normal(*f)).collect();
    let weights = samples.iter().map(|(f, _)| mesh.face_area(*f) / mean_area).collect();
    let tags = samples.iter().map(|(_, p)| labeler.label(p)).collect();
    PointCloud::new(points)
        .with_normals(normals)?
        .with_labels(tags)?
        .with_weights(weights)
}
