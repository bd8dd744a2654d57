//! Weighted-PCA canonical placement of local patches.
//!
//! A patch is translated so its weighted centroid sits at the origin,
//! rotated so its principal axes line up with x, y, z in decreasing-variance
//! order, and scaled so the standard deviation along x is one.

use nalgebra::{Matrix3, Point3, SymmetricEigen, Vector3};

use super::cloud::PointCloud;
use super::transform::SimilarityTransform;
use crate::error::{Error, Result};

/// Minimum ratio of the second to the largest covariance eigenvalue.
pub const RANK_RATIO_MIN: f64 = 1e-12;
/// Third moments below this magnitude do not decide an axis sign.
pub const SKEW_EPS: f64 = 1e-9;

/// Returns the canonical cloud and the transform mapping it back to the input.
pub fn weighted_pca_canonicalize(cloud: &PointCloud) -> Result<(PointCloud, SimilarityTransform)> {
    let n = cloud.len();
    if n < 4 {
        return Err(Error::DegeneratePatch(format!("{n} points (need at least 4)")));
    }
    let pts = cloud.points();
    let w: Vec<f64> = (0..n).map(|i| cloud.weight(i)).collect();
    let wsum: f64 = w.iter().sum();

    let centroid = pts
        .iter()
        .zip(&w)
        .fold(Vector3::zeros(), |acc, (p, wi)| acc + p.coords * *wi)
        / wsum;
    let cov = pts.iter().zip(&w).fold(Matrix3::zeros(), |acc, (p, wi)| {
        let d = p.coords - centroid;
        acc + d * d.transpose() * *wi
    }) / wsum;

    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let lambda: [f64; 3] = order.map(|k| eig.eigenvalues[k]);
    if !(lambda[0] > 0.0) || !(lambda[1] / lambda[0] >= RANK_RATIO_MIN) {
        return Err(Error::DegeneratePatch(format!(
            "covariance eigenvalues {lambda:?} are rank deficient"
        )));
    }
    let scale = lambda[0].sqrt();
    let mut axes: [Vector3<f64>; 3] = order.map(|k| eig.eigenvectors.column(k).into_owned());

    let far = farthest_index(pts, &centroid);
    let mut confidence = [0.0f64; 3];
    for (k, axis) in axes.iter_mut().enumerate() {
        let skew = pts
            .iter()
            .zip(&w)
            .map(|(p, wi)| {
                let y = axis.dot(&(p.coords - centroid)) / scale;
                wi * y * y * y
            })
            .sum::<f64>()
            / wsum;
        confidence[k] = skew.abs();
        let flip = if skew.abs() >= SKEW_EPS {
            skew < 0.0
        } else {
            axis.dot(&(pts[far].coords - centroid)) < 0.0
        };
        if flip {
            *axis = -*axis;
        }
    }
    let mut rotation = Matrix3::from_columns(&axes);
    if rotation.determinant() < 0.0 {
        // the least decisive axis gives way
        let weakest = (0..3)
            .rev()
            .min_by(|&a, &b| confidence[a].total_cmp(&confidence[b]))
            .unwrap();
        rotation.set_column(weakest, &(-rotation.column(weakest)));
    }

    let to_world = SimilarityTransform::from_parts_unchecked(rotation, centroid, scale);
    let rt = rotation.transpose();
    let canonical_pts: Vec<Point3<f64>> = pts
        .iter()
        .map(|p| Point3::from(rt * (p.coords - centroid) / scale))
        .collect();
    let mut canonical = cloud.with_points(canonical_pts)?;
    if let Some(normals) = cloud.normals() {
        let rotated = normals
            .iter()
            .map(|n| n.map(|n| (rt * n).normalize()))
            .collect();
        canonical = canonical.with_optional_normals(rotated)?;
    }
    Ok((canonical, to_world))
}

fn farthest_index(pts: &[Point3<f64>], centroid: &Vector3<f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, p) in pts.iter().enumerate() {
        let d = (p.coords - centroid).norm_squared();
        if d > best.1 {
            best = (i, d);
        }
    }
    best.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Anisotropic, skewed blob with distinct principal variances.
    pub(crate) fn skewed_patch(rng: &mut impl Rng, n: usize) -> PointCloud {
        let pts = (0..n)
            .map(|_| {
                let x: f64 = rng.random::<f64>().powi(2) * 3.0;
                let y: f64 = rng.random::<f64>().powi(3) * 1.5;
                let z: f64 = rng.random::<f64>().powi(4) * 0.5;
                Point3::new(x, y, z)
            })
            .collect();
        PointCloud::new(pts)
    }

    #[test]
    fn canonical_input_is_a_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (canon, _) = weighted_pca_canonicalize(&skewed_patch(&mut rng, 400)).unwrap();
        let (again, to_world) = weighted_pca_canonicalize(&canon).unwrap();
        assert!(to_world.max_abs_diff(&SimilarityTransform::identity()) < 1e-9);
        for (a, b) in canon.points().iter().zip(again.points()) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn canonical_frame_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cloud = skewed_patch(&mut rng, 500);
        let (canon, to_world) = weighted_pca_canonicalize(&cloud).unwrap();
        let n = canon.len() as f64;
        let mean = canon.points().iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
        assert!(mean.norm() < 1e-12);
        let cov = canon
            .points()
            .iter()
            .fold(Matrix3::zeros(), |a, p| a + p.coords * p.coords.transpose())
            / n;
        assert!((cov[(0, 0)] - 1.0).abs() < 1e-12);
        assert!(cov[(0, 0)] >= cov[(1, 1)] && cov[(1, 1)] >= cov[(2, 2)]);
        assert!(cov[(0, 1)].abs() < 1e-12 && cov[(0, 2)].abs() < 1e-12 && cov[(1, 2)].abs() < 1e-12);
        assert!((to_world.rotation().determinant() - 1.0).abs() < 1e-12);
        for (c, p) in canon.points().iter().zip(cloud.points()) {
            assert!((to_world.apply(c) - p).norm() <= 1e-9 * p.coords.norm().max(1.0));
        }
    }

    #[test]
    fn invariant_under_rigid_motion_and_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let cloud = skewed_patch(&mut rng, 300);
            let axis = Vector3::new(rng.random(), rng.random(), rng.random::<f64>() + 0.1);
            let rot = Rotation3::new(axis.normalize() * rng.random_range(0.0..3.0));
            let t = Vector3::new(rng.random(), rng.random(), rng.random()) * 10.0;
            let s = rng.random_range(0.1..10.0);
            let moved = PointCloud::new(
                cloud
                    .points()
                    .iter()
                    .map(|p| Point3::from(rot * p.coords * s + t))
                    .collect(),
            );
            let (a, _) = weighted_pca_canonicalize(&cloud).unwrap();
            let (b, _) = weighted_pca_canonicalize(&moved).unwrap();
            for (p, q) in a.points().iter().zip(b.points()) {
                assert!((p - q).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn collinear_and_tiny_patches_are_degenerate() {
        let line = PointCloud::new((0..10).map(|i| Point3::new(i as f64, 2.0 * i as f64, 0.0)).collect());
        assert!(matches!(weighted_pca_canonicalize(&line), Err(Error::DegeneratePatch(_))));
        let three = PointCloud::new(vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)]);
        assert!(matches!(weighted_pca_canonicalize(&three), Err(Error::DegeneratePatch(_))));
    }

    #[test]
    fn planar_patches_canonicalize() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts = (0..200)
            .map(|_| Point3::new(rng.random::<f64>() * 2.0, rng.random::<f64>(), 0.0))
            .collect();
        let cloud = PointCloud::new(pts)
            .with_normals(vec![Vector3::z(); 200])
            .unwrap();
        let (canon, _) = weighted_pca_canonicalize(&cloud).unwrap();
        for (i, p) in canon.points().iter().enumerate() {
            assert!(p.z.abs() < 1e-9);
            let n = canon.normal(i).unwrap();
            assert!((n.z.abs() - 1.0).abs() < 1e-9);
        }
    }
}
