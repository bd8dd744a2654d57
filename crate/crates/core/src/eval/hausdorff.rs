use nalgebra::Point3;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::mesh::{closest_point_on_triangle, point_triangle_distance};
use crate::geometry::{PointCloud, SpatialIndex, TriangleMesh};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct HistogramBin {
    pub bin_edge: f64,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct HausdorffHistogram {
    pub hausdorff_max: f64,
    pub histogram: Vec<HistogramBin>,
}

/// Exact closest-triangle queries over a mesh. Triangles are indexed by
/// centroid; a query first takes the triangle of the nearest centroid, then
/// checks every triangle whose centroid could still hold something closer.
pub struct TriangleLocator<'a> {
    mesh: &'a TriangleMesh,
    centroids: SpatialIndex,
    reach: f64,
}

impl<'a> TriangleLocator<'a> {
    pub fn new(mesh: &'a TriangleMesh) -> Result<Self> {
        if mesh.faces().is_empty() {
            return Err(Error::EmptyInput("mesh has no faces"));
        }
        let mut reach: f64 = 0.0;
        let centroids: Vec<Point3<f64>> = (0..mesh.faces().len())
            .map(|f| {
                let [a, b, c] = mesh.triangle(f);
                let g = Point3::from((a.coords + b.coords + c.coords) / 3.0);
                reach = reach.max((a - g).norm()).max((b - g).norm()).max((c - g).norm());
                g
            })
            .collect();
        Ok(Self {
            mesh,
            centroids: SpatialIndex::from_points(&centroids),
            reach,
        })
    }

    fn face_distance(&self, p: &Point3<f64>, f: usize) -> f64 {
        let [a, b, c] = self.mesh.triangle(f);
        point_triangle_distance(p, &a, &b, &c)
    }

    /// Distance from `p` to the closest point of the mesh surface.
    pub fn distance(&self, p: &Point3<f64>) -> f64 {
        let (first, _) = self.centroids.nearest_point(p).expect("non-empty");
        let bound = self.face_distance(p, first);
        // dist(p, T) ≥ |p − centroid(T)| − reach
        self.centroids
            .within_radius_point(p, (bound + self.reach) * (1.0 + 1e-12) + 1e-300)
            .into_iter()
            .map(|f| self.face_distance(p, f))
            .fold(bound, f64::min)
    }

    /// Closest point of the mesh surface to `p`; ties go to the lower face
    /// index.
    pub fn closest_point(&self, p: &Point3<f64>) -> Point3<f64> {
        let (first, _) = self.centroids.nearest_point(p).expect("non-empty");
        let bound = self.face_distance(p, first);
        let (_, f) = self
            .centroids
            .within_radius_point(p, (bound + self.reach) * (1.0 + 1e-12) + 1e-300)
            .into_iter()
            .map(|f| (self.face_distance(p, f), f))
            .fold((bound, first), |best, c| if c.0 < best.0 || (c.0 == best.0 && c.1 < best.1) { c } else { best });
        let [a, b, c] = self.mesh.triangle(f);
        closest_point_on_triangle(p, &a, &b, &c)
    }
}

/// Moves every point of `cloud` to its closest point on `mesh`.
pub fn project_onto_mesh(cloud: &PointCloud, mesh: &TriangleMesh) -> Result<PointCloud> {
    let locator = TriangleLocator::new(mesh)?;
    let points = cloud.points().par_iter().map(|p| locator.closest_point(p)).collect();
    Ok(PointCloud::new(points))
}

/// Per-point distances from `reference` to the closest mesh triangle.
pub fn distances_to_mesh(reference: &PointCloud, mesh: &TriangleMesh) -> Result<Vec<f64>> {
    let locator = TriangleLocator::new(mesh)?;
    Ok(reference.points().par_iter().map(|p| locator.distance(p)).collect())
}

/// One-sided Hausdorff distance (reference → mesh) with a histogram of the
/// per-point distances over `[0, max]` in `bins` equal bins, as percentages.
pub fn hausdorff_histogram(reference: &PointCloud, mesh: &TriangleMesh, bins: usize) -> Result<HausdorffHistogram> {
    if reference.is_empty() {
        return Err(Error::EmptyInput("reference has no points"));
    }
    if bins == 0 {
        return Err(Error::InvalidParameter("histogram needs at least one bin".into()));
    }
    let d = distances_to_mesh(reference, mesh)?;
    Ok(histogram_of(&d, bins))
}

/// Symmetric variant: also measures every mesh vertex against the reference
/// points and reports the larger of the two maxima. The histogram stays
/// reference → mesh.
pub fn hausdorff_histogram_symmetric(
    reference: &PointCloud,
    mesh: &TriangleMesh,
    bins: usize,
) -> Result<HausdorffHistogram> {
    let mut h = hausdorff_histogram(reference, mesh, bins)?;
    let index = SpatialIndex::from_points(reference.points());
    let back = mesh
        .vertices()
        .par_iter()
        .map(|v| index.nearest_point(v).map_or(0.0, |(_, d)| d))
        .reduce(|| 0.0, f64::max);
    h.hausdorff_max = h.hausdorff_max.max(back);
    Ok(h)
}

/// Histogram of precomputed distances over `[0, max]` in `bins` equal bins.
pub fn histogram_of(distances: &[f64], bins: usize) -> HausdorffHistogram {
    let max = distances.iter().copied().fold(0.0, f64::max);
    let mut counts = vec![0usize; bins];
    for &d in distances {
        let b = if max > 0.0 {
            ((d / max * bins as f64) as usize).min(bins - 1)
        } else {
            0
        };
        counts[b] += 1;
    }
    let n = distances.len() as f64;
    let histogram = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| HistogramBin {
            bin_edge: max * (i + 1) as f64 / bins as f64,
            percent: 100.0 * c as f64 / n,
        })
        .collect();
    HausdorffHistogram {
        hausdorff_max: max,
        histogram,
    }
}
