//! Exact k-nearest and radius queries over a fixed point set.
//!
//! The tree works in any dimension: 3 for point clouds, `C(d+3,3) - 1` for
//! moment descriptors. Distances are compared squared, and ties are broken
//! toward the smaller point index so results never depend on tree layout.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::Point3;

const LEAF_SIZE: usize = 12;

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Immutable kd-tree. Safe to query from many threads at once.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    dim: usize,
    coords: Vec<f64>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    dist2: f64,
    index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl SpatialIndex {
    /// Builds over `coords.len() / dim` points stored row-major.
    pub fn new(dim: usize, coords: Vec<f64>) -> Self {
        assert!(dim > 0, "dimension must be positive");
        assert_eq!(coords.len() % dim, 0, "coordinate buffer is not a multiple of dim");
        let n = coords.len() / dim;
        let mut index = Self {
            dim,
            coords,
            order: (0..n).collect(),
            nodes: Vec::new(),
        };
        if n > 0 {
            index.build(0, n);
        }
        index
    }

    pub fn from_points(points: &[Point3<f64>]) -> Self {
        let coords = points.iter().flat_map(|p| [p.x, p.y, p.z]).collect();
        Self::new(3, coords)
    }

    pub fn from_rows<R: AsRef<[f64]>>(dim: usize, rows: &[R]) -> Self {
        let mut coords = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            assert_eq!(r.as_ref().len(), dim);
            coords.extend_from_slice(r.as_ref());
        }
        Self::new(dim, coords)
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let dim = self.dim;
        let axis = (0..dim)
            .map(|k| {
                let (lo, hi) = self.order[start..end].iter().fold(
                    (f64::INFINITY, f64::NEG_INFINITY),
                    |(lo, hi), &i| {
                        let v = self.coords[i * dim + k];
                        (lo.min(v), hi.max(v))
                    },
                );
                (k, hi - lo)
            })
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|(k, _)| k)
            .unwrap_or(0);
        let mid = start + (end - start) / 2;
        {
            let coords = &self.coords;
            self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
                coords[a * dim + axis]
                    .total_cmp(&coords[b * dim + axis])
                    .then(a.cmp(&b))
            });
        }
        let value = self.coords[self.order[mid] * dim + axis];
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    /// Nearest point and its Euclidean distance.
    pub fn nearest(&self, query: &[f64]) -> Option<(usize, f64)> {
        self.knn(query, 1).into_iter().next()
    }

    /// The `k` nearest points sorted by (distance, index).
    pub fn knn(&self, query: &[f64], k: usize) -> Vec<(usize, f64)> {
        assert_eq!(query.len(), self.dim);
        if k == 0 || self.is_empty() {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.knn_node(0, query, k, &mut heap);
        let mut out: Vec<Candidate> = heap.into_vec();
        out.sort();
        out.into_iter().map(|c| (c.index, c.dist2.sqrt())).collect()
    }

    fn knn_node(&self, node: usize, q: &[f64], k: usize, heap: &mut BinaryHeap<Candidate>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let c = Candidate {
                        dist2: squared_distance(q, self.point(i)),
                        index: i,
                    };
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.knn_node(near, q, k, heap);
                if heap.len() < k || diff * diff <= heap.peek().unwrap().dist2 {
                    self.knn_node(far, q, k, heap);
                }
            }
        }
    }

    /// Indices of all points with distance ≤ `radius`, ascending.
    pub fn within_radius(&self, query: &[f64], radius: f64) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .within_radius_dist2(query, radius)
            .into_iter()
            .map(|(i, _)| i)
            .collect();
        out.sort_unstable();
        out
    }

    /// `(index, squared distance)` pairs with distance ≤ `radius`, unordered.
    pub fn within_radius_dist2(&self, query: &[f64], radius: f64) -> Vec<(usize, f64)> {
        assert_eq!(query.len(), self.dim);
        let mut out = Vec::new();
        if self.is_empty() || !(radius >= 0.0) {
            return out;
        }
        let r2 = radius * radius;
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            match self.nodes[node] {
                Node::Leaf { start, end } => {
                    for &i in &self.order[start..end] {
                        let d2 = squared_distance(query, self.point(i));
                        if d2 <= r2 {
                            out.push((i, d2));
                        }
                    }
                }
                Node::Split {
                    axis,
                    value,
                    left,
                    right,
                } => {
                    let diff = query[axis] - value;
                    if diff <= radius {
                        stack.push(left);
                    }
                    if diff >= -radius {
                        stack.push(right);
                    }
                }
            }
        }
        out
    }

    pub fn nearest_point(&self, p: &Point3<f64>) -> Option<(usize, f64)> {
        self.nearest(&[p.x, p.y, p.z])
    }

    pub fn knn_point(&self, p: &Point3<f64>, k: usize) -> Vec<(usize, f64)> {
        self.knn(&[p.x, p.y, p.z], k)
    }

    pub fn within_radius_point(&self, p: &Point3<f64>, radius: f64) -> Vec<usize> {
        self.within_radius(&[p.x, p.y, p.z], radius)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_radius(points: &[Point3<f64>], q: &Point3<f64>, r: f64) -> Vec<usize> {
        points
            .iter()
            .enumerate()
            .filter(|(_, p)| squared_distance(&[p.x, p.y, p.z], &[q.x, q.y, q.z]) <= r * r)
            .map(|(i, _)| i)
            .collect()
    }

    fn arb_points(max: usize) -> impl Strategy<Value = Vec<Point3<f64>>> {
        prop::collection::vec(prop::array::uniform3(-1.0f64..1.0), 1..max)
            .prop_map(|v| v.into_iter().map(Point3::from).collect())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn radius_query_matches_linear_scan(
            points in arb_points(1000),
            q in prop::array::uniform3(-1.2f64..1.2),
            r in 0.0f64..0.8,
        ) {
            let index = SpatialIndex::from_points(&points);
            let q = Point3::from(q);
            prop_assert_eq!(index.within_radius_point(&q, r), brute_radius(&points, &q, r));
        }

        #[test]
        fn knn_matches_linear_scan(
            points in arb_points(300),
            q in prop::array::uniform3(-1.2f64..1.2),
            k in 1usize..20,
        ) {
            let index = SpatialIndex::from_points(&points);
            let q = Point3::from(q);
            let mut all: Vec<(usize, f64)> = points
                .iter()
                .enumerate()
                .map(|(i, p)| (i, squared_distance(&[p.x, p.y, p.z], &[q.x, q.y, q.z])))
                .collect();
            all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            let expected: Vec<usize> = all.iter().take(k).map(|c| c.0).collect();
            let got: Vec<usize> = index.knn_point(&q, k).iter().map(|c| c.0).collect();
            prop_assert_eq!(got, expected);
        }
    }

    #[test]
    fn duplicate_points_tie_break_by_index() {
        let pts = vec![Point3::new(1.0, 0.0, 0.0); 40];
        let index = SpatialIndex::from_points(&pts);
        assert_eq!(index.nearest_point(&Point3::origin()).unwrap().0, 0);
        let knn: Vec<usize> = index.knn_point(&Point3::origin(), 3).iter().map(|c| c.0).collect();
        assert_eq!(knn, vec![0, 1, 2]);
    }

    #[test]
    fn high_dimensional_nearest() {
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|i| (0..83).map(|k| ((i * 7 + k * 3) % 11) as f64).collect())
            .collect();
        let index = SpatialIndex::from_rows(83, &rows);
        for (i, r) in rows.iter().enumerate() {
            let (j, d) = index.nearest(r).unwrap();
            assert_eq!(d, 0.0);
            assert!(j <= i);
        }
    }

    #[test]
    fn empty_index() {
        let index = SpatialIndex::from_points(&[]);
        assert!(index.nearest_point(&Point3::origin()).is_none());
        assert!(index.within_radius_point(&Point3::origin(), 1.0).is_empty());
    }
}
