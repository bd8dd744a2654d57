//! Closed primitive meshes with outward (counter-clockwise) winding.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{Point3, Vector3};

use super::mesh::TriangleMesh;

fn build(vertices: Vec<Point3<f64>>, faces: Vec<[usize; 3]>) -> TriangleMesh {
    TriangleMesh::new(vertices, faces).expect("primitive indices are in range")
}

/// Axis-aligned box centered at the origin.
pub fn cuboid(size: Vector3<f64>) -> TriangleMesh {
    let h = size / 2.0;
    let v = (0..8)
        .map(|i| {
            Point3::new(
                if i & 1 == 0 { -h.x } else { h.x },
                if i & 2 == 0 { -h.y } else { h.y },
                if i & 4 == 0 { -h.z } else { h.z },
            )
        })
        .collect();
    let faces = vec![
        [0, 2, 1],
        [1, 2, 3], // z-
        [4, 5, 6],
        [5, 7, 6], // z+
        [0, 1, 4],
        [1, 5, 4], // y-
        [2, 6, 3],
        [3, 6, 7], // y+
        [0, 4, 2],
        [2, 4, 6], // x-
        [1, 3, 5],
        [3, 7, 5], // x+
    ];
    build(v, faces)
}

pub fn cube(side: f64) -> TriangleMesh {
    cuboid(Vector3::repeat(side))
}

/// Subdivided icosahedron projected onto a sphere of `radius`.
pub fn icosphere(radius: f64, subdivisions: u32) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vector3<f64>> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vector3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vector3<f64>>| {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                verts.push((verts[a] + verts[b]).normalize());
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    build(
        verts.into_iter().map(|v| Point3::from(v * radius)).collect(),
        faces,
    )
}

/// Capped cylinder along z, centered at the origin.
pub fn cylinder(radius: f64, height: f64, segments: usize) -> TriangleMesh {
    frustum(radius, radius, height, segments)
}

/// Capped cone along z with its apex at `+height/2`.
pub fn cone(radius: f64, height: f64, segments: usize) -> TriangleMesh {
    let h = height / 2.0;
    let mut v: Vec<Point3<f64>> = ring(radius, -h, segments);
    let apex = v.len();
    v.push(Point3::new(0.0, 0.0, h));
    let bottom = v.len();
    v.push(Point3::new(0.0, 0.0, -h));
    let mut faces = Vec::new();
    for i in 0..segments {
        let j = (i + 1) % segments;
        faces.push([i, j, apex]);
        faces.push([j, i, bottom]);
    }
    build(v, faces)
}

fn ring(radius: f64, z: f64, segments: usize) -> Vec<Point3<f64>> {
    (0..segments)
        .map(|i| {
            let a = 2.0 * PI * i as f64 / segments as f64;
            Point3::new(radius * a.cos(), radius * a.sin(), z)
        })
        .collect()
}

fn frustum(bottom_radius: f64, top_radius: f64, height: f64, segments: usize) -> TriangleMesh {
    let h = height / 2.0;
    let mut v = ring(bottom_radius, -h, segments);
    v.extend(ring(top_radius, h, segments));
    let bc = v.len();
    v.push(Point3::new(0.0, 0.0, -h));
    let tc = v.len();
    v.push(Point3::new(0.0, 0.0, h));
    let mut faces = Vec::new();
    for i in 0..segments {
        let j = (i + 1) % segments;
        let (bi, bj, ti, tj) = (i, j, segments + i, segments + j);
        faces.push([bi, bj, tj]);
        faces.push([bi, tj, ti]);
        faces.push([bj, bi, bc]);
        faces.push([ti, tj, tc]);
    }
    build(v, faces)
}

/// Torus around the z axis.
pub fn torus(major: f64, minor: f64, major_segments: usize, minor_segments: usize) -> TriangleMesh {
    let mut v = Vec::with_capacity(major_segments * minor_segments);
    for i in 0..major_segments {
        let u = 2.0 * PI * i as f64 / major_segments as f64;
        for j in 0..minor_segments {
            let w = 2.0 * PI * j as f64 / minor_segments as f64;
            let r = major + minor * w.cos();
            v.push(Point3::new(r * u.cos(), r * u.sin(), minor * w.sin()));
        }
    }
    let idx = |i: usize, j: usize| (i % major_segments) * minor_segments + (j % minor_segments);
    let mut faces = Vec::new();
    for i in 0..major_segments {
        for j in 0..minor_segments {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    build(v, faces)
}

/// Signed enclosed volume; positive for closed meshes with outward winding.
pub fn signed_volume(mesh: &TriangleMesh) -> f64 {
    (0..mesh.faces().len())
        .map(|f| {
            let [a, b, c] = mesh.triangle(f);
            a.coords.dot(&b.coords.cross(&c.coords)) / 6.0
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn volumes_are_positive_and_close_to_analytic() {
        let cases = [
            (cube(2.0), 8.0, 1e-12),
            (icosphere(1.0, 4), 4.0 / 3.0 * PI, 0.01),
            (cylinder(1.0, 2.0, 96), 2.0 * PI, 0.01),
            (cone(1.0, 3.0, 96), PI, 0.01),
            (torus(2.0, 0.5, 96, 48), 2.0 * PI * PI * 2.0 * 0.25, 0.01),
        ];
        for (mesh, expected, rel) in cases {
            let vol = signed_volume(&mesh);
            assert!(vol > 0.0);
            assert!((vol - expected).abs() <= rel * expected, "{vol} vs {expected}");
        }
    }

    #[test]
    fn cube_normals_point_outward() {
        let m = cube(1.0);
        for f in 0..m.faces().len() {
            let [a, b, c] = m.triangle(f);
            let centroid = (a.coords + b.coords + c.coords) / 3.0;
            assert!(m.face_normal(f).dot(&centroid) > 0.0);
        }
    }
}
