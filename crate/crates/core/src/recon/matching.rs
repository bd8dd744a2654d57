use nalgebra::{Matrix3, Point3, Vector3};
use serde::Serialize;

use super::Neighborhood;
use crate::error::{Error, Result};
use crate::geometry::{icp_align_indexed, IcpParams, PointCloud, SimilarityTransform, SpatialIndex};
use crate::library::PriorLibrary;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MatchResult {
    pub neighborhood_id: usize,
    pub prior_id: u64,
    pub descriptor_distance: f64,
    /// Mean squared point-to-plane residual of the neighborhood against the
    /// aligned prior, in world units.
    pub confidence_mse: f64,
    pub accepted: bool,
}

/// A prior placed onto the scan: world positions, rotated normals, labels.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedPrior {
    pub neighborhood_id: usize,
    pub prior_id: u64,
    pub points: PointCloud,
}

/// The `k` exemplars nearest to the neighborhood's descriptor, ascending by
/// distance, ties to the earlier exemplar.
pub fn match_prior(nb: &Neighborhood, lib: &PriorLibrary, k: usize) -> Result<Vec<(u64, f64)>> {
    let index = lib.exemplar_index().ok_or(Error::NoExemplars)?;
    if nb.descriptor.len() != index.dim() {
        return Err(Error::DimensionMismatch {
            expected: index.dim(),
            found: nb.descriptor.len(),
        });
    }
    Ok(index
        .knn(nb.descriptor.values(), k)
        .into_iter()
        .map(|(row, d)| (lib.exemplar_ids()[row], d))
        .collect())
}

/// Proper axis flips of a canonical frame: PCA fixes each axis only up to
/// sign, and the sign rule can disagree between a clean prior and a noisy
/// neighborhood.
const FLIPS: [[f64; 3]; 4] = [
    [1.0, 1.0, 1.0],
    [1.0, -1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
];

/// Correspondence cap of the second ICP pass, as a fraction of R.
const TRIM_REL: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct AlignParams {
    /// Ball radius in world units.
    pub radius: f64,
    /// Acceptance threshold as a fraction of `radius`.
    pub mse_tau: f64,
    pub icp: IcpParams,
}

/// Places every candidate (under each axis flip) into the neighborhood's
/// world frame, refines with ICP against the neighborhood's scan points and
/// keeps the lowest confidence MSE. Accepted iff `mse ≤ (τ·R)²`.
pub fn refine_and_align(
    nb: &Neighborhood,
    scan: &PointCloud,
    candidates: &[(u64, f64)],
    lib: &PriorLibrary,
    params: &AlignParams,
) -> Result<(MatchResult, AlignedPrior)> {
    if candidates.is_empty() {
        return Err(Error::InvalidParameter("no candidate priors".into()));
    }
    let target: Vec<Point3<f64>> = nb.members.iter().map(|&m| scan.points()[m]).collect();
    let target_index = SpatialIndex::from_points(&target);
    let icp = IcpParams {
        max_corr_dist: 2.0 * params.radius,
        ..params.icp
    };
    let mut best: Option<(f64, u64, f64, SimilarityTransform)> = None;
    for &(prior_id, distance) in candidates {
        let prior = lib
            .prior(prior_id)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown prior {prior_id}")))?;
        for flip in FLIPS {
            let placement = nb.to_world.compose(&flip_transform(flip));
            let placed: Vec<Point3<f64>> = prior.points.points().iter().map(|p| placement.apply(p)).collect();
            let fit = match icp_align_indexed(&placed, &target, &target_index, &icp) {
                Ok(fit) => fit,
                Err(Error::NoOverlap) => continue,
                Err(e) => return Err(e),
            };
            let mut to_scan = fit.transform.compose(&placement);
            // trimmed pass: drop pairs that only exist because the shapes differ
            let trimmed = IcpParams {
                max_corr_dist: TRIM_REL * params.radius,
                ..params.icp
            };
            let moved: Vec<Point3<f64>> = prior.points.points().iter().map(|p| to_scan.apply(p)).collect();
            if let Ok(fine) = icp_align_indexed(&moved, &target, &target_index, &trimmed) {
                to_scan = fine.transform.compose(&to_scan);
            }
            let mse = confidence_mse(&target, &prior.points, &to_scan);
            if best.as_ref().is_none_or(|b| mse < b.0) {
                best = Some((mse, prior_id, distance, to_scan));
            }
        }
    }
    let (mse, prior_id, distance, to_scan) = best.ok_or(Error::MatchRejected)?;
    let prior = &lib.priors()[prior_id as usize];
    let threshold = params.mse_tau * params.radius;
    let result = MatchResult {
        neighborhood_id: nb.id,
        prior_id,
        descriptor_distance: distance,
        confidence_mse: mse,
        accepted: mse <= threshold * threshold,
    };
    Ok((
        result,
        AlignedPrior {
            neighborhood_id: nb.id,
            prior_id,
            points: place(&prior.points, &to_scan)?,
        },
    ))
}

fn flip_transform(signs: [f64; 3]) -> SimilarityTransform {
    SimilarityTransform::new(Matrix3::from_diagonal(&Vector3::from(signs)), Vector3::zeros(), 1.0)
        .expect("axis flips are proper rotations")
}

/// Mean over target points of the squared distance to the tangent plane of
/// the nearest placed prior point (plain distance where it has no normal).
fn confidence_mse(target: &[Point3<f64>], prior: &PointCloud, to_scan: &SimilarityTransform) -> f64 {
    let placed: Vec<Point3<f64>> = prior.points().iter().map(|p| to_scan.apply(p)).collect();
    let index = SpatialIndex::from_points(&placed);
    let sum: f64 = target
        .iter()
        .map(|p| {
            let (j, d) = index.nearest_point(p).expect("prior has points");
            match prior.normal(j) {
                Some(n) => (p - placed[j]).dot(&to_scan.apply_normal(&n)).powi(2),
                None => d * d,
            }
        })
        .sum();
    sum / target.len() as f64
}

fn place(cloud: &PointCloud, t: &SimilarityTransform) -> Result<PointCloud> {
    let mut out = cloud
        .with_points(cloud.points().iter().map(|p| t.apply(p)).collect())?
        .without_weights();
    if let Some(ns) = cloud.normals() {
        out = out.with_optional_normals(ns.iter().map(|n| n.map(|n| t.apply_normal(&n))).collect())?;
    }
    Ok(out)
}
