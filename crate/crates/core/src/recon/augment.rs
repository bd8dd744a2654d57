use std::collections::BTreeMap;

use nalgebra::Vector3;
use rayon::prelude::*;

use super::AlignedPrior;
use crate::geometry::{FeatureLabel, PointCloud, SpatialIndex};

/// Original points within this fraction of R of an aligned prior point take
/// over its normal and label.
pub const INHERIT_REL: f64 = 0.02;

/// Union of the scan and the aligned priors (scan first, then priors in the
/// given order). Scan points close to a prior point inherit its normal and
/// label; the rest stay unoriented.
pub fn augment(scan: &PointCloud, aligned: &[AlignedPrior], radius: f64) -> PointCloud {
    if aligned.is_empty() {
        return scan.clone();
    }
    let parts: Vec<&PointCloud> = aligned.iter().map(|a| &a.points).collect();
    let priors = PointCloud::concat(&parts);
    let index = SpatialIndex::from_points(priors.points());
    let reach = INHERIT_REL * radius;
    let inherited: Vec<(Option<Vector3<f64>>, FeatureLabel)> = scan
        .points()
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let own = (scan.normal(i), scan.label(i));
            if own.0.is_some() {
                return own;
            }
            match index.nearest_point(p) {
                Some((j, d)) if d <= reach && priors.normal(j).is_some() => (priors.normal(j), priors.label(j)),
                _ => own,
            }
        })
        .collect();
    let (normals, labels): (Vec<_>, Vec<_>) = inherited.into_iter().unzip();
    let base = scan
        .clone()
        .with_optional_normals(normals)
        .and_then(|c| c.with_labels(labels))
        .expect("lengths match the scan");
    PointCloud::concat(&[&base, &priors])
}

/// Makes the normals of overlapping aligned priors agree.
///
/// Canonical frames are only determined up to axis flips, so an aligned
/// prior may arrive with its normals reversed. Neighboring priors vote on
/// relative orientation through nearby point pairs; orientation is spread
/// along the strongest votes from a root per connected group, the root
/// being the prior holding the group's largest-x point, oriented so that
/// point's normal has non-negative x. Returns which priors were flipped.
pub fn harmonize_orientations(aligned: &mut [AlignedPrior], radius: f64) -> Vec<bool> {
    let m = aligned.len();
    let mut owner = Vec::new();
    let mut pts = Vec::new();
    let mut normals = Vec::new();
    let mut starts = vec![0];
    for (k, a) in aligned.iter().enumerate() {
        for (i, p) in a.points.points().iter().enumerate() {
            if let Some(n) = a.points.normal(i) {
                owner.push(k);
                pts.push(*p);
                normals.push(n);
            }
        }
        starts.push(pts.len());
    }
    let mut flipped = vec![false; m];
    if pts.is_empty() {
        return flipped;
    }
    let index = SpatialIndex::from_points(&pts);
    let pair_reach = 0.1 * radius;
    let votes: Vec<BTreeMap<usize, f64>> = (0..m)
        .into_par_iter()
        .map(|k| {
            let mut v = BTreeMap::new();
            for idx in starts[k]..starts[k + 1] {
                for (j, d) in index.knn_point(&pts[idx], 8) {
                    if owner[j] != k && d <= pair_reach {
                        *v.entry(owner[j]).or_insert(0.0) += normals[idx].dot(&normals[j]);
                    }
                }
            }
            v
        })
        .collect();
    let mut weight: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); m];
    for (k, v) in votes.iter().enumerate() {
        for (&l, &w) in v {
            *weight[k].entry(l).or_insert(0.0) += w;
            *weight[l].entry(k).or_insert(0.0) += w;
        }
    }

    let mut sign = vec![0i8; m];
    loop {
        // root: unvisited prior with the largest-x oriented point
        let Some(root_pt) = (0..pts.len())
            .filter(|&i| sign[owner[i]] == 0)
            .max_by(|&a, &b| pts[a].x.total_cmp(&pts[b].x).then(b.cmp(&a)))
        else {
            break;
        };
        let root = owner[root_pt];
        sign[root] = if normals[root_pt].x < 0.0 { -1 } else { 1 };
        // maximum-|vote| spanning tree, grown greedily
        let mut frontier: Vec<(usize, usize)> = weight[root].keys().map(|&l| (root, l)).collect();
        loop {
            frontier.retain(|&(_, l)| sign[l] == 0);
            let Some(pos) = (0..frontier.len()).max_by(|&a, &b| {
                let wa = weight[frontier[a].0][&frontier[a].1].abs();
                let wb = weight[frontier[b].0][&frontier[b].1].abs();
                wa.total_cmp(&wb).then(b.cmp(&a))
            }) else {
                break;
            };
            let (k, l) = frontier.swap_remove(pos);
            let w = weight[k][&l];
            sign[l] = if w < 0.0 { -sign[k] } else { sign[k] };
            frontier.extend(weight[l].keys().filter(|&&x| sign[x] == 0).map(|&x| (l, x)));
        }
    }
    for (k, a) in aligned.iter_mut().enumerate() {
        if sign[k] < 0 {
            flipped[k] = true;
            let ns = a
                .points
                .normals()
                .map(|ns| ns.iter().map(|n| n.map(|n| -n)).collect::<Vec<_>>());
            if let Some(ns) = ns {
                a.points = a.points.clone().with_optional_normals(ns).expect("same length");
            }
        }
    }
    flipped
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Point3;

    fn patch_on_plane(x0: f64, n: usize, normal_sign: f64, z: f64) -> PointCloud {
        let pts: Vec<Point3<f64>> = (0..n)
            .flat_map(|i| (0..n).map(move |j| Point3::new(x0 + i as f64 * 0.01, j as f64 * 0.01, z)))
            .collect();
        let len = pts.len();
        PointCloud::new(pts)
            .with_normals(vec![Vector3::new(0.0, 0.0, normal_sign); len])
            .unwrap()
    }

    fn aligned(points: PointCloud, id: usize) -> AlignedPrior {
        AlignedPrior {
            neighborhood_id: id,
            prior_id: id as u64,
            points,
        }
    }

    #[test]
    fn no_matches_leaves_the_scan_alone() {
        let scan = PointCloud::new(vec![Point3::origin(); 3]);
        assert_eq!(augment(&scan, &[], 1.0), scan);
    }

    #[test]
    fn union_counts() {
        let scan = PointCloud::new((0..1000).map(|i| Point3::new(i as f64, 5.0, 5.0)).collect());
        let prior = PointCloud::new((0..500).map(|i| Point3::new(i as f64 * 0.001, 0.0, 0.0)).collect())
            .with_normals(vec![Vector3::z(); 500])
            .unwrap();
        let out = augment(&scan, &[aligned(prior, 0)], 1.0);
        assert_eq!(out.len(), 1500);
        assert_eq!(out.oriented_count(), 500);
        assert_eq!(&out.points()[..1000], scan.points());
    }

    #[test]
    fn nearby_scan_points_inherit() {
        let scan = PointCloud::new(vec![Point3::new(0.0, 0.0, 0.001), Point3::new(0.0, 0.0, 0.5)]);
        let mut prior = patch_on_plane(-0.05, 10, 1.0, 0.0);
        let labels = vec![FeatureLabel::Edge; prior.len()];
        prior = prior.with_labels(labels).unwrap();
        let out = augment(&scan, &[aligned(prior, 0)], 1.0);
        assert_eq!(out.normal(0), Some(Vector3::z()));
        assert_eq!(out.label(0), FeatureLabel::Edge);
        assert_eq!(out.normal(1), None);
        assert_eq!(out.label(1), FeatureLabel::Regular);
    }

    #[test]
    fn overlapping_patches_end_up_consistent() {
        let mut ps = vec![
            aligned(patch_on_plane(0.0, 10, 1.0, 0.0), 0),
            aligned(patch_on_plane(0.05, 10, -1.0, 0.0), 1),
            aligned(patch_on_plane(0.1, 10, 1.0, 0.0), 2),
        ];
        let flipped = harmonize_orientations(&mut ps, 1.0);
        // the largest-x point (patch 2) roots the group
        assert_eq!(flipped, vec![false, true, false]);
        let z = ps[0].points.normal(0).unwrap().z;
        for p in &ps {
            assert!(p.points.normals().unwrap().iter().all(|n| n.unwrap().z == z));
        }
    }

    #[test]
    fn separate_groups_are_rooted_separately() {
        let mut ps = vec![
            aligned(patch_on_plane(0.0, 5, -1.0, 0.0), 0),
            aligned(patch_on_plane(0.0, 5, 1.0, 5.0), 1),
        ];
        assert_eq!(harmonize_orientations(&mut ps, 1.0), vec![false, false]);
    }

    #[test]
    fn root_faces_outward() {
        // a lone patch whose largest-x point carries a normal pointing to -x
        let pts = vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0)];
        let cloud = PointCloud::new(pts).with_normals(vec![-Vector3::x(); 2]).unwrap();
        let mut ps = vec![aligned(cloud, 0)];
        assert_eq!(harmonize_orientations(&mut ps, 1.0), vec![true]);
        assert_eq!(ps[0].points.normal(1), Some(Vector3::x()));
    }
}
