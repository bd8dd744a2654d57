//! Point-to-point ICP with a correspondence distance cap.

use nalgebra::{Matrix3, Point3, Vector3};

use super::spatial::SpatialIndex;
use super::transform::SimilarityTransform;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcpParams {
    pub max_iter: usize,
    /// Stop once the rms improvement of an iteration drops below this.
    pub tol: f64,
    pub max_corr_dist: f64,
}

impl Default for IcpParams {
    fn default() -> Self {
        Self {
            max_iter: 50,
            tol: 1e-10,
            max_corr_dist: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IcpResult {
    /// Rigid transform (scale 1) taking source points onto the target.
    pub transform: SimilarityTransform,
    pub rms: f64,
    pub iterations: usize,
    /// rms after each accepted iteration, starting with the initial pose.
    pub rms_history: Vec<f64>,
}

/// Registers `source` onto `target`.
pub fn icp_align(source: &[Point3<f64>], target: &[Point3<f64>], params: &IcpParams) -> Result<IcpResult> {
    let index = SpatialIndex::from_points(target);
    icp_align_indexed(source, target, &index, params)
}

/// As [`icp_align`] with a prebuilt index over `target`.
pub fn icp_align_indexed(
    source: &[Point3<f64>],
    target: &[Point3<f64>],
    index: &SpatialIndex,
    params: &IcpParams,
) -> Result<IcpResult> {
    if source.is_empty() {
        return Err(Error::EmptyInput("ICP source"));
    }
    if target.is_empty() {
        return Err(Error::EmptyInput("ICP target"));
    }
    let mut transform = SimilarityTransform::identity();
    let mut moved: Vec<Point3<f64>> = source.to_vec();
    let mut pairs = correspondences(&moved, index, params.max_corr_dist);
    if pairs.is_empty() {
        return Err(Error::NoOverlap);
    }
    let mut rms = pair_rms(&moved, target, &pairs);
    let mut history = vec![rms];
    let mut iterations = 0;
    while iterations < params.max_iter && rms > 0.0 {
        let step = kabsch(&moved, target, &pairs);
        let candidate: Vec<Point3<f64>> = moved.iter().map(|p| step.apply(p)).collect();
        let next_pairs = correspondences(&candidate, index, params.max_corr_dist);
        if next_pairs.is_empty() {
            break;
        }
        let next_rms = pair_rms(&candidate, target, &next_pairs);
        if next_rms > rms {
            // the correspondence set grew with worse pairs; keep the last pose
            break;
        }
        iterations += 1;
        transform = step.compose(&transform);
        moved = candidate;
        pairs = next_pairs;
        let improvement = rms - next_rms;
        rms = next_rms;
        history.push(rms);
        if improvement < params.tol {
            break;
        }
    }
    Ok(IcpResult {
        transform,
        rms,
        iterations,
        rms_history: history,
    })
}

fn correspondences(points: &[Point3<f64>], index: &SpatialIndex, cap: f64) -> Vec<(usize, usize)> {
    points
        .iter()
        .enumerate()
        .filter_map(|(i, p)| {
            index
                .nearest_point(p)
                .filter(|(_, d)| *d <= cap)
                .map(|(j, _)| (i, j))
        })
        .collect()
}

fn pair_rms(src: &[Point3<f64>], dst: &[Point3<f64>], pairs: &[(usize, usize)]) -> f64 {
    let sum: f64 = pairs.iter().map(|&(i, j)| (src[i] - dst[j]).norm_squared()).sum();
    (sum / pairs.len() as f64).sqrt()
}

/// Least-squares rigid fit of paired points (Kabsch / Umeyama without scale).
pub fn kabsch(src: &[Point3<f64>], dst: &[Point3<f64>], pairs: &[(usize, usize)]) -> SimilarityTransform {
    let n = pairs.len() as f64;
    let cs = pairs.iter().fold(Vector3::zeros(), |a, &(i, _)| a + src[i].coords) / n;
    let cd = pairs.iter().fold(Vector3::zeros(), |a, &(_, j)| a + dst[j].coords) / n;
    let h = pairs.iter().fold(Matrix3::zeros(), |a, &(i, j)| {
        a + (src[i].coords - cs) * (dst[j].coords - cd).transpose()
    });
    let svd = h.svd(true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested Vᵀ");
    let v = vt.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let fix = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, if d == 0.0 { 1.0 } else { d }));
    let rotation = v * fix * u.transpose();
    let translation = cd - rotation * cs;
    SimilarityTransform::from_parts_unchecked(rotation, translation, 1.0)
}
