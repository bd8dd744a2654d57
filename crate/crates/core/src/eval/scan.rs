use nalgebra::{Point3, Vector3};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::{sample_mesh, PointCloud, TriangleMesh};

#[derive(Debug, Clone, PartialEq)]
pub struct VirtualScan {
    /// Raw points: no normals, labels or weights.
    pub cloud: PointCloud,
    pub outlier: Vec<bool>,
}

/// Simulated raw scan: area-uniform surface samples pushed along the face
/// normal by `N(0, (noise_sigma_rel · diagonal)²)`, with
/// `round(outlier_frac · count)` of them replaced by uniform points in the
/// bounding box scaled 1.2× about its center.
pub fn virtual_scan(
    mesh: &TriangleMesh,
    count: usize,
    noise_sigma_rel: f64,
    outlier_frac: f64,
    seed: u64,
) -> Result<VirtualScan> {
    if !(noise_sigma_rel >= 0.0) {
        return Err(Error::InvalidParameter(format!("noise must be ≥ 0, got {noise_sigma_rel}")));
    }
    if !(0.0..1.0).contains(&outlier_frac) {
        return Err(Error::InvalidParameter(format!("outlier fraction must lie in [0, 1), got {outlier_frac}")));
    }
    mesh.ensure_samplable()?;
    let surface = sample_mesh(mesh, count, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5ca1_ab1e);
    let sigma = noise_sigma_rel * mesh.bounding_diagonal();
    let mut points: Vec<Point3<f64>> = surface.points().to_vec();
    if sigma > 0.0 {
        let noise = Normal::new(0.0, sigma).expect("positive sigma");
        for (i, p) in points.iter_mut().enumerate() {
            let n = surface.normal(i).unwrap_or_else(Vector3::zeros);
            *p += noise.sample(&mut rng) * n;
        }
    }
    let outliers = (outlier_frac * count as f64).round() as usize;
    let mut outlier = vec![false; count];
    if outliers > 0 {
        let (lo, hi) = mesh.bounding_box().expect("samplable mesh has vertices");
        let mid = nalgebra::center(&lo, &hi);
        let half = (hi - lo) * 0.6;
        for i in sample(&mut rng, count, outliers).into_vec() {
            outlier[i] = true;
            points[i] = mid + Vector3::new(
                half.x * rng.random_range(-1.0..=1.0),
                half.y * rng.random_range(-1.0..=1.0),
                half.z * rng.random_range(-1.0..=1.0),
            );
        }
    }
    Ok(VirtualScan {
        cloud: PointCloud::new(points),
        outlier,
    })
}
