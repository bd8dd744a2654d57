use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::geometry::SpatialIndex;

/// Greedy ball cover in index order.
///
/// Point 0 is the first seed; everything within `radius` of a seed is marked
/// covered and the next seed is the lowest-index point still uncovered.
pub fn select_seeds(points: &[Point3<f64>], radius: f64) -> Result<Vec<usize>> {
    let index = SpatialIndex::from_points(points);
    select_seeds_indexed(points, &index, radius)
}

pub fn select_seeds_indexed(points: &[Point3<f64>], index: &SpatialIndex, radius: f64) -> Result<Vec<usize>> {
    if points.is_empty() {
        return Err(Error::EmptyInput("seed selection on an empty cloud"));
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter(format!("seed radius must be positive, got {radius}")));
    }
    let mut covered = vec![false; points.len()];
    let mut seeds = Vec::new();
    let mut next = 0;
    while next < points.len() {
        seeds.push(next);
        for (j, _) in index.within_radius_dist2(&[points[next].x, points[next].y, points[next].z], radius) {
            covered[j] = true;
        }
        while next < points.len() && covered[next] {
            next += 1;
        }
    }
    Ok(seeds)
}
