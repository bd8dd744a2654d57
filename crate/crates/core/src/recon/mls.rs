use log::warn;
use nalgebra::{Matrix6, Point3, Vector3, Vector6};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{FeatureLabel, PointCloud, SpatialIndex};

/// Oriented neighbors whose normal deviates from the reference by more than
/// this angle do not shape the local plane (keeps the two sides of a crease
/// apart).
const NORMAL_AGREEMENT_COS: f64 = 0.866;

/// Fewest supporting points for the quadratic height field; smaller balls
/// fall back to the plane.
const MIN_QUADRIC_SUPPORT: usize = 10;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MlsStats {
    /// Points with no neighbor but themselves, per iteration summed.
    pub isolated: usize,
    /// Points whose support ball had too few oriented points.
    pub skipped: usize,
    pub projected: usize,
}

/// MLS projection: each point moves onto the Gaussian-weighted
/// (`exp(−d²/h²)`) surface of its `h`-ball, repeated `iterations` times on
/// the previous iteration's positions. A reference plane passes through the
/// weighted centroid with the weighted mean of the agreeing oriented normals;
/// a weighted quadratic height field over that plane is the surface, falling
/// back to the plane itself when the fit is poorly supported. Balls with
/// fewer than half their points oriented are left alone, as are points
/// labeled Edge or Corner. Unoriented points pick up the fitted normal.
pub fn mls_project(cloud: &PointCloud, h: f64, iterations: usize) -> Result<(PointCloud, MlsStats)> {
    mls_project_masked(cloud, h, iterations, &vec![true; cloud.len()])
}

/// As [`mls_project`], moving only the points flagged in `movable`; the
/// others still shape the local planes.
pub fn mls_project_masked(
    cloud: &PointCloud,
    h: f64,
    iterations: usize,
    movable: &[bool],
) -> Result<(PointCloud, MlsStats)> {
    if movable.len() != cloud.len() {
        return Err(Error::InvalidParameter(format!(
            "mask has {} entries for {} points",
            movable.len(),
            cloud.len()
        )));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("MLS support radius must be positive, got {h}")));
    }
    let mut stats = MlsStats::default();
    let mut points = cloud.points().to_vec();
    let mut normals: Vec<Option<Vector3<f64>>> = (0..cloud.len()).map(|i| cloud.normal(i)).collect();
    for _ in 0..iterations {
        let index = SpatialIndex::from_points(&points);
        let step: Vec<Step> = (0..points.len())
            .into_par_iter()
            .map(|i| {
                if !movable[i] || matches!(cloud.label(i), FeatureLabel::Edge | FeatureLabel::Corner) {
                    return Step::Fixed;
                }
                project_one(i, &points, &normals, &index, h)
            })
            .collect();
        let mut next = points.clone();
        for (i, s) in step.into_iter().enumerate() {
            match s {
                Step::Fixed => {}
                Step::Isolated => stats.isolated += 1,
                Step::Skipped => stats.skipped += 1,
                Step::Moved(p, n) => {
                    next[i] = p;
                    normals[i].get_or_insert(n);
                    stats.projected += 1;
                }
            }
        }
        points = next;
    }
    if stats.isolated > 0 {
        warn!("MLS: {} isolated point visits left unchanged", stats.isolated);
    }
    let out = cloud.with_points(points)?.with_optional_normals(normals)?;
    Ok((out, stats))
}

enum Step {
    Fixed,
    Isolated,
    Skipped,
    Moved(Point3<f64>, Vector3<f64>),
}

fn project_one(
    i: usize,
    points: &[Point3<f64>],
    normals: &[Option<Vector3<f64>>],
    index: &SpatialIndex,
    h: f64,
) -> Step {
    let p = points[i];
    let ball = index.within_radius_dist2(&[p.x, p.y, p.z], h);
    if ball.len() <= 1 {
        return Step::Isolated;
    }
    let oriented = ball.iter().filter(|(j, _)| normals[*j].is_some()).count();
    if 2 * oriented < ball.len() {
        return Step::Skipped;
    }
    let reference = normals[i].unwrap_or_else(|| {
        let nearest = ball
            .iter()
            .filter(|(j, _)| normals[*j].is_some())
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .expect("at least one oriented neighbor");
        normals[nearest.0].unwrap()
    });
    // accumulate in index order so the result does not depend on tree layout
    let mut ball = ball;
    ball.sort_unstable_by_key(|(j, _)| *j);
    let mut used = Vec::with_capacity(ball.len());
    let (mut wsum, mut centroid, mut nsum) = (0.0, Vector3::zeros(), Vector3::zeros());
    for &(j, d2) in &ball {
        let w = (-d2 / (h * h)).exp();
        match normals[j] {
            Some(n) if n.dot(&reference) < NORMAL_AGREEMENT_COS => continue,
            Some(n) => nsum += w * n,
            None => {}
        }
        wsum += w;
        centroid += w * points[j].coords;
        used.push((j, w));
    }
    let norm = nsum.norm();
    if wsum <= 0.0 || norm < 1e-12 {
        return Step::Skipped;
    }
    let n = nsum / norm;
    let c = Point3::from(centroid / wsum);
    let on_plane = p - (p - c).dot(&n) * n;
    match height_field(&used, points, &c, &n, h, &on_plane) {
        Some((moved, fitted)) => Step::Moved(moved, fitted),
        None => Step::Moved(on_plane, n),
    }
}

/// Weighted quadratic height field over the plane `(c, n)`, evaluated above
/// `at`. Returns the surface point and its normal, or `None` when the fit is
/// underdetermined or strays from the plane by more than half the support.
fn height_field(
    used: &[(usize, f64)],
    points: &[Point3<f64>],
    c: &Point3<f64>,
    n: &Vector3<f64>,
    h: f64,
    at: &Point3<f64>,
) -> Option<(Point3<f64>, Vector3<f64>)> {
    if used.len() < MIN_QUADRIC_SUPPORT {
        return None;
    }
    let e1 = n.cross(&if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() }).normalize();
    let e2 = n.cross(&e1);
    let basis = |u: f64, v: f64| Vector6::new(1.0, u, v, u * u, u * v, v * v);
    let (mut a, mut b) = (Matrix6::zeros(), Vector6::zeros());
    for &(j, w) in used {
        let d = points[j] - c;
        let phi = basis(d.dot(&e1) / h, d.dot(&e2) / h);
        a += w * phi * phi.transpose();
        b += w * d.dot(n) * phi;
    }
    let coef = a.cholesky()?.solve(&b);
    let d = at - c;
    let (u, v) = (d.dot(&e1) / h, d.dot(&e2) / h);
    let height = coef.dot(&basis(u, v));
    let gu = (coef[1] + 2.0 * coef[3] * u + coef[4] * v) / h;
    let gv = (coef[2] + coef[4] * u + 2.0 * coef[5] * v) / h;
    if !height.is_finite() || height.abs() > 0.5 * h || gu * gu + gv * gv > 1.0 {
        return None;
    }
    Some((at + height * n, (n - gu * e1 - gv * e2).normalize()))
}
