//! Ball extraction and canonical patch construction, shared by library
//! priors and scan neighborhoods.

use nalgebra::{Point3, Vector3};

use super::moments::{moments_descriptor, Descriptor};
use crate::error::{Error, Result};
use crate::geometry::{weighted_pca_canonicalize, PointCloud, SimilarityTransform, SpatialIndex};

/// Points within `radius` of `center` (ascending index order), attributes
/// included. Fewer than four points is a degenerate patch.
pub fn extract_prior(cloud: &PointCloud, center: &Point3<f64>, radius: f64) -> Result<PointCloud> {
    let index = SpatialIndex::from_points(cloud.points());
    extract_ball(cloud, &index, center, radius)
}

pub fn extract_ball(
    cloud: &PointCloud,
    index: &SpatialIndex,
    center: &Point3<f64>,
    radius: f64,
) -> Result<PointCloud> {
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter(format!("ball radius must be positive, got {radius}")));
    }
    let members = index.within_radius_point(center, radius);
    if members.len() < 4 {
        return Err(Error::DegeneratePatch(format!(
            "{} points within radius {radius}",
            members.len()
        )));
    }
    Ok(cloud.select(&members))
}

/// A canonicalized local patch with its stored placement and descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub center: Point3<f64>,
    /// Canonical-frame points (normals rotated, weights averaging one).
    pub points: PointCloud,
    pub to_world: SimilarityTransform,
    pub descriptor: Descriptor,
}

impl Patch {
    /// Canonicalizes a raw world-frame patch and describes it.
    ///
    /// Canonical coordinates, normals and weights are rounded to `f32` so the
    /// patch survives the library file format bit for bit, and the descriptor
    /// is computed from the rounded values.
    pub fn from_world(center: Point3<f64>, raw: &PointCloud, order: u32) -> Result<Patch> {
        let normalized = raw.clone().with_weights(raw.normalized_weights())?;
        let (canonical, to_world) = weighted_pca_canonicalize(&normalized)?;
        let points = quantize(&canonical)?;
        let descriptor = moments_descriptor(&points, order)?;
        Ok(Patch {
            center,
            points,
            to_world,
            descriptor,
        })
    }

    pub fn world_points(&self) -> Vec<Point3<f64>> {
        self.points.points().iter().map(|p| self.to_world.apply(p)).collect()
    }

    pub fn world_normals(&self) -> Option<Vec<Option<Vector3<f64>>>> {
        self.points.normals().map(|ns| {
            ns.iter()
                .map(|n| n.map(|n| self.to_world.apply_normal(&n)))
                .collect()
        })
    }

    /// The patch mapped back to world coordinates, attributes included.
    pub fn world_cloud(&self) -> Result<PointCloud> {
        let mut cloud = self.points.with_points(self.world_points())?;
        if let Some(n) = self.world_normals() {
            cloud = cloud.with_optional_normals(n)?;
        }
        Ok(cloud)
    }
}

fn round32(v: f64) -> f64 {
    v as f32 as f64
}

fn quantize(cloud: &PointCloud) -> Result<PointCloud> {
    let pts = cloud
        .points()
        .iter()
        .map(|p| Point3::new(round32(p.x), round32(p.y), round32(p.z)))
        .collect();
    let mut out = PointCloud::new(pts);
    if let Some(ns) = cloud.normals() {
        out = out.with_optional_normals(
            ns.iter()
                .map(|n| n.map(|n| Vector3::new(round32(n.x), round32(n.y), round32(n.z))))
                .collect(),
        )?;
    }
    if let Some(l) = cloud.labels() {
        out = out.with_labels(l.to_vec())?;
    }
    if let Some(w) = cloud.weights() {
        out = out.with_weights(w.iter().map(|&w| round32(w)).collect())?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{primitives, sample_mesh};

    #[test]
    fn spherical_cap_bound() {
        let cloud = sample_mesh(&primitives::icosphere(1.0, 4), 20_000, 2).unwrap();
        let north = Point3::new(0.0, 0.0, 1.0);
        let cap = extract_prior(&cloud, &north, 0.5).unwrap();
        assert!(cap.len() > 100);
        // chord 0.5 on the unit sphere ⇒ z ≥ 1 - 0.5²/2; the faceted mesh
        // sits slightly inside the sphere, hence the small slack
        for p in cap.points() {
            assert!(p.z >= 0.875 - 2e-3, "{p:?}");
        }
        let scan = cloud
            .points()
            .iter()
            .filter(|p| (*p - north).norm_squared() <= 0.25)
            .count();
        assert_eq!(cap.len(), scan);
    }

    #[test]
    fn large_radius_returns_everything() {
        let cloud = sample_mesh(&primitives::cube(1.0), 500, 1).unwrap();
        let ball = extract_prior(&cloud, &Point3::origin(), 10.0).unwrap();
        assert_eq!(ball, cloud);
    }

    #[test]
    fn tiny_radius_is_degenerate() {
        let cloud = sample_mesh(&primitives::cube(1.0), 500, 1).unwrap();
        let c = cloud.points()[0];
        assert!(matches!(extract_prior(&cloud, &c, 1e-9), Err(Error::DegeneratePatch(_))));
    }

    #[test]
    fn patch_world_round_trip() {
        let cloud = sample_mesh(&primitives::cube(1.0), 3000, 4).unwrap();
        let c = cloud.points()[10];
        let raw = extract_prior(&cloud, &c, 0.3).unwrap();
        let patch = Patch::from_world(c, &raw, 6).unwrap();
        for (a, b) in patch.world_points().iter().zip(raw.points()) {
            assert!((a - b).norm() < 1e-6);
            assert!((a - c).norm() <= 0.3 + 1e-6);
        }
        let again = moments_descriptor(&patch.points, 6).unwrap();
        assert!(again.distance(&patch.descriptor) <= 1e-9);
    }
}
