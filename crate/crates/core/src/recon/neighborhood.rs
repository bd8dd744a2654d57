use log::warn;
use nalgebra::Point3;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, SimilarityTransform, SpatialIndex};
use crate::library::{select_seeds_indexed, Descriptor, Patch};

/// A canonicalized ball of the scan, built exactly like a library prior.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhood {
    pub id: usize,
    pub center: Point3<f64>,
    /// Scan indices inside the ball, ascending.
    pub members: Vec<usize>,
    pub points: PointCloud,
    pub to_world: SimilarityTransform,
    pub descriptor: Descriptor,
}

/// Covers the scan with balls of `radius` (greedy seed order) and
/// canonicalizes each. Degenerate balls are skipped with a warning; ids are
/// consecutive over the kept neighborhoods.
pub fn build_neighborhoods(scan: &PointCloud, radius: f64, order: u32) -> Result<Vec<Neighborhood>> {
    if scan.is_empty() {
        return Err(Error::EmptyInput("scan has no points"));
    }
    let index = SpatialIndex::from_points(scan.points());
    let seeds = select_seeds_indexed(scan.points(), &index, radius)?;
    let built: Vec<Result<(Vec<usize>, Patch)>> = seeds
        .par_iter()
        .map(|&s| {
            let center = scan.points()[s];
            let members = index.within_radius_point(&center, radius);
            if members.len() < 4 {
                return Err(Error::DegeneratePatch(format!("{} points in ball", members.len())));
            }
            let patch = Patch::from_world(center, &scan.select(&members), order)?;
            Ok((members, patch))
        })
        .collect();
    let mut out = Vec::with_capacity(built.len());
    let mut skipped = 0;
    for b in built {
        match b {
            Ok((members, patch)) => out.push(Neighborhood {
                id: out.len(),
                center: patch.center,
                members,
                points: patch.points,
                to_world: patch.to_world,
                descriptor: patch.descriptor,
            }),
            Err(Error::DegeneratePatch(_)) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if skipped > 0 {
        warn!("{skipped} of {} scan neighborhoods are degenerate and were skipped", seeds.len());
    }
    if out.is_empty() {
        return Err(Error::NothingToMatch);
    }
    Ok(out)
}
