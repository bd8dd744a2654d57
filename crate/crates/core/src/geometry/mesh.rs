use nalgebra::{Point3, Vector3};

use super::cloud::bounding_box;
use crate::error::{Error, Result};

/// Faces whose area falls below this fraction of the squared bounding
/// diagonal are flagged degenerate and never sampled.
const DEGENERATE_AREA_REL: f64 = 1e-14;

/// Indexed triangle mesh with cached per-face areas and unit normals.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point3<f64>>,
    faces: Vec<[usize; 3]>,
    areas: Vec<f64>,
    normals: Vec<Vector3<f64>>,
    degenerate: Vec<bool>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Point3<f64>>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let nv = vertices.len();
        if let Some((fi, f)) = faces
            .iter()
            .enumerate()
            .find(|(_, f)| f.iter().any(|&v| v >= nv))
        {
            return Err(Error::InvalidMesh(format!(
                "face {fi} references vertex {:?} but the mesh has {nv} vertices",
                f
            )));
        }
        if vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidMesh("non-finite vertex coordinate".into()));
        }
        let diag = bounding_box(&vertices).map_or(0.0, |(lo, hi)| (hi - lo).norm());
        let min_area = DEGENERATE_AREA_REL * diag * diag;
        let mut areas = Vec::with_capacity(faces.len());
        let mut normals = Vec::with_capacity(faces.len());
        let mut degenerate = Vec::with_capacity(faces.len());
        for f in &faces {
            let [a, b, c] = f.map(|i| vertices[i]);
            let cross = (b - a).cross(&(c - a));
            let area = 0.5 * cross.norm();
            let bad = !(area > min_area);
            areas.push(if bad { 0.0 } else { area });
            normals.push(if bad { Vector3::zeros() } else { cross.normalize() });
            degenerate.push(bad);
        }
        Ok(Self {
            vertices,
            faces,
            areas,
            normals,
            degenerate,
        })
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn face_area(&self, f: usize) -> f64 {
        self.areas[f]
    }

    /// Unit normal (zero for degenerate faces).
    pub fn face_normal(&self, f: usize) -> Vector3<f64> {
        self.normals[f]
    }

    pub fn is_degenerate(&self, f: usize) -> bool {
        self.degenerate[f]
    }

    pub fn valid_face_count(&self) -> usize {
        self.degenerate.iter().filter(|d| !**d).count()
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    pub fn triangle(&self, f: usize) -> [Point3<f64>; 3] {
        self.faces[f].map(|i| self.vertices[i])
    }

    pub fn bounding_box(&self) -> Option<(Point3<f64>, Point3<f64>)> {
        bounding_box(&self.vertices)
    }

    pub fn bounding_diagonal(&self) -> f64 {
        self.bounding_box().map_or(0.0, |(lo, hi)| (hi - lo).norm())
    }

    /// Fails with `InvalidMesh` unless at least one face can be sampled.
    pub fn ensure_samplable(&self) -> Result<()> {
        if self.faces.is_empty() {
            return Err(Error::InvalidMesh("mesh has no faces".into()));
        }
        if self.valid_face_count() == 0 {
            return Err(Error::InvalidMesh("every face is degenerate".into()));
        }
        Ok(())
    }
}

/// Closest point on triangle `abc` to `p` (Voronoi-region walk).
pub fn closest_point_on_triangle(
    p: &Point3<f64>,
    a: &Point3<f64>,
    b: &Point3<f64>,
    c: &Point3<f64>,
) -> Point3<f64> {
    let ab = b - a;
    let ac = c - a;
    if ab.cross(&ac).norm_squared() == 0.0 {
        // collinear corners: the triangle is its longest edge
        return [(a, b), (b, c), (c, a)]
            .iter()
            .map(|(s, t)| closest_point_on_segment(p, s, t))
            .min_by(|x, y| (p - x).norm_squared().total_cmp(&(p - y).norm_squared()))
            .expect("three edges");
    }
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

pub fn point_triangle_distance(
    p: &Point3<f64>,
    a: &Point3<f64>,
    b: &Point3<f64>,
    c: &Point3<f64>,
) -> f64 {
    (p - closest_point_on_triangle(p, a, b, c)).norm()
}

pub fn closest_point_on_segment(p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>) -> Point3<f64> {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 {
        ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    a + ab * t
}

/// Distance from `p` to the segment `ab`.
pub fn point_segment_distance(p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    (p - closest_point_on_segment(p, a, b)).norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinear_triangle_distance_is_finite() {
        let (a, b) = (Point3::origin(), Point3::new(2.0, 0.0, 0.0));
        let p = Point3::new(1.0, 1.0, 0.0);
        assert_eq!(point_triangle_distance(&p, &a, &b, &a), 1.0);
        assert_eq!(point_triangle_distance(&p, &a, &a, &a), 2f64.sqrt());
        assert_eq!(point_triangle_distance(&p, &a, &Point3::new(1.0, 0.0, 0.0), &b), 1.0);
    }

    fn unit_triangle() -> TriangleMesh {
        TriangleMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap()
    }

    #[test]
    fn face_area_and_normal() {
        let m = unit_triangle();
        assert!((m.face_area(0) - 0.5).abs() < 1e-15);
        assert_eq!(m.face_normal(0), Vector3::z());
    }

    #[test]
    fn out_of_range_index_is_invalid() {
        let r = TriangleMesh::new(vec![Point3::origin(); 2], vec![[0, 1, 2]]);
        assert!(matches!(r, Err(Error::InvalidMesh(_))));
    }

    #[test]
    fn degenerate_faces_are_flagged() {
        let m = TriangleMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(2.0, 0.0, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert!(m.is_degenerate(0));
        assert!(matches!(m.ensure_samplable(), Err(Error::InvalidMesh(_))));
        let empty = TriangleMesh::new(vec![], vec![]).unwrap();
        assert!(empty.ensure_samplable().is_err());
    }

    #[test]
    fn closest_point_regions() {
        let [a, b, c] = unit_triangle().triangle(0);
        // interior projection
        let p = Point3::new(0.25, 0.25, 1.0);
        assert!((point_triangle_distance(&p, &a, &b, &c) - 1.0).abs() < 1e-15);
        // vertex region
        let p = Point3::new(-1.0, -1.0, 0.0);
        assert_eq!(closest_point_on_triangle(&p, &a, &b, &c), a);
        // edge region bc
        let p = Point3::new(1.0, 1.0, 0.0);
        let q = closest_point_on_triangle(&p, &a, &b, &c);
        assert!((q - Point3::new(0.5, 0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn segment_distance() {
        let a = Point3::new(0.0, 0.0, 0.0);
        let b = Point3::new(1.0, 0.0, 0.0);
        assert!((point_segment_distance(&Point3::new(0.5, 2.0, 0.0), &a, &b) - 2.0).abs() < 1e-15);
        assert!((point_segment_distance(&Point3::new(-3.0, 4.0, 0.0), &a, &b) - 5.0).abs() < 1e-15);
    }
}
