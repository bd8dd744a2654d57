use nalgebra::Point3;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{sample_mesh, PointCloud, SpatialIndex, TriangleMesh};
use crate::library::{extract_ball, moments_descriptor, select_seeds_indexed, Descriptor, Patch};

/// Breakdown of the descriptor-based reconstruction error.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DescriptorError {
    /// Sum over compared seeds of the moment-vector distances, penalties
    /// included.
    pub total: f64,
    pub seeds: usize,
    /// Seeds whose reconstructed ball was empty.
    pub penalized: usize,
    pub penalty: f64,
    /// Seeds skipped because the original ball was degenerate.
    pub skipped: usize,
}

/// Unweighted area-uniform samples of a reference mesh, for use as the
/// original in [`reconstruction_error`].
pub fn sample_reference(mesh: &TriangleMesh, count: usize, seed: u64) -> Result<PointCloud> {
    Ok(PointCloud::new(sample_mesh(mesh, count, seed)?.points().to_vec()))
}

/// Sum over the original's seed balls of the distance between the moment
/// descriptors of the original and the reconstruction inside that ball.
///
/// Seeds come from a greedy `radius` cover of the original. Both balls are
/// expressed in the canonical frame of the original ball, so the two
/// descriptors differ only through shape and the error varies continuously
/// with the reconstruction. A seed whose reconstructed ball is empty costs
/// the largest distance observed at any other seed (or, if there is none,
/// the largest original descriptor norm).
pub fn reconstruction_error(
    original: &PointCloud,
    reconstructed: &PointCloud,
    radius: f64,
    order: u32,
) -> Result<DescriptorError> {
    if original.is_empty() {
        return Err(Error::EmptyInput("original has no points"));
    }
    if reconstructed.is_empty() {
        return Err(Error::EmptyInput("reconstruction has no points"));
    }
    let orig_index = SpatialIndex::from_points(original.points());
    let recon_index = SpatialIndex::from_points(reconstructed.points());
    let seeds = select_seeds_indexed(original.points(), &orig_index, radius)?;

    enum Seed {
        Skipped,
        Empty(f64),
        Compared(f64),
    }
    let per_seed: Vec<Result<Seed>> = seeds
        .par_iter()
        .map(|&s| {
            let center: Point3<f64> = original.points()[s];
            let ball = match extract_ball(original, &orig_index, &center, radius) {
                Ok(b) => b,
                Err(Error::DegeneratePatch(_)) => return Ok(Seed::Skipped),
                Err(e) => return Err(e),
            };
            let patch = match Patch::from_world(center, &ball, order) {
                Ok(p) => p,
                Err(Error::DegeneratePatch(_)) => return Ok(Seed::Skipped),
                Err(e) => return Err(e),
            };
            // both sides unrounded, in the original ball's frame
            let to_canonical = patch.to_world.inverse();
            let describe = |c: &PointCloud| -> Result<Descriptor> {
                let canonical = c.with_points(c.points().iter().map(|p| to_canonical.apply(p)).collect())?;
                moments_descriptor(&canonical, order)
            };
            let reference = describe(&ball)?;
            let members = recon_index.within_radius_point(&center, radius);
            if members.is_empty() {
                return Ok(Seed::Empty(reference.norm()));
            }
            let d = describe(&reconstructed.select(&members))?;
            Ok(Seed::Compared(d.distance(&reference)))
        })
        .collect();

    let mut compared = Vec::new();
    let mut empty_norms = Vec::new();
    let mut skipped = 0;
    for s in per_seed {
        match s? {
            Seed::Skipped => skipped += 1,
            Seed::Empty(norm) => empty_norms.push(norm),
            Seed::Compared(d) => compared.push(d),
        }
    }
    if compared.is_empty() && empty_norms.is_empty() {
        return Err(Error::NoComparableRegions);
    }
    let penalty = if compared.is_empty() {
        empty_norms.iter().copied().fold(0.0, f64::max)
    } else {
        compared.iter().copied().fold(0.0, f64::max)
    };
    Ok(DescriptorError {
        total: compared.iter().sum::<f64>() + penalty * empty_norms.len() as f64,
        seeds: compared.len() + empty_norms.len(),
        penalized: empty_norms.len(),
        penalty,
        skipped,
    })
}
