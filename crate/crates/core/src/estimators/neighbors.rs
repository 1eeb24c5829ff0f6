//! Exact Chebyshev (max-norm) neighbour statistics.
//!
//! Two queries are needed by the k-NN estimators: the distance from every
//! point to its k-th nearest neighbour, and the number of points strictly
//! inside a per-point radius. Both exist as a brute-force scan and as a
//! k-d tree walk; the two produce identical results.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use super::sample::{NeighborSearch, SampleMatrix, BRUTE_FORCE_LIMIT};

#[inline]
fn chebyshev(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Chebyshev distance, or `None` as soon as it reaches `bound`.
#[inline]
fn chebyshev_below(a: &[f64], b: &[f64], bound: f64) -> Option<f64> {
    let mut m = 0.0_f64;
    for (x, y) in a.iter().zip(b) {
        let d = (x - y).abs();
        if d >= bound {
            return None;
        }
        m = m.max(d);
    }
    Some(m)
}

fn use_tree(method: NeighborSearch, n: usize) -> bool {
    match method {
        NeighborSearch::BruteForce => false,
        NeighborSearch::KdTree => true,
        NeighborSearch::Auto => n > BRUTE_FORCE_LIMIT,
    }
}

/// Distance from each point to its k-th nearest other point.
pub fn kth_neighbor_distances(points: &SampleMatrix, k: usize, method: NeighborSearch) -> Vec<f64> {
    assert!(k >= 1 && k < points.n(), "need 1 <= k < n");
    if use_tree(method, points.n()) {
        let tree = KdTree::build(points);
        (0..points.n()).into_par_iter().map(|i| tree.kth_distance(i, k)).collect()
    } else {
        (0..points.n()).into_par_iter().map(|i| brute_kth(points, i, k)).collect()
    }
}

/// For each point i, the number of points j ≠ i with distance < radii[i].
pub fn count_within(points: &SampleMatrix, radii: &[f64], method: NeighborSearch) -> Vec<usize> {
    assert_eq!(radii.len(), points.n());
    if points.d() == 1 {
        return count_within_sorted(points, radii);
    }
    if use_tree(method, points.n()) {
        let tree = KdTree::build(points);
        (0..points.n()).into_par_iter().map(|i| tree.count_within(i, radii[i])).collect()
    } else {
        (0..points.n())
            .into_par_iter()
            .map(|i| {
                let p = points.row(i);
                let r = radii[i];
                (0..points.n())
                    .filter(|&j| j != i && chebyshev_below(p, points.row(j), r).is_some())
                    .count()
            })
            .collect()
    }
}

fn brute_kth(points: &SampleMatrix, i: usize, k: usize) -> f64 {
    // ascending list of the k smallest distances seen so far
    let mut best: Vec<f64> = Vec::with_capacity(k + 1);
    let p = points.row(i);
    for j in 0..points.n() {
        if j == i {
            continue;
        }
        let bound = if best.len() == k { best[k - 1] } else { f64::INFINITY };
        if let Some(d) = chebyshev_below(p, points.row(j), bound) {
            let pos = best.partition_point(|&b| b <= d);
            best.insert(pos, d);
            best.truncate(k);
        }
    }
    best[k - 1]
}

/// One-dimensional counts by binary search over the sorted values. The two
/// predicates are the same floating-point comparisons the brute-force scan
/// performs, so the counts agree exactly.
fn count_within_sorted(points: &SampleMatrix, radii: &[f64]) -> Vec<usize> {
    let values = points.as_slice();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    values
        .par_iter()
        .zip(radii.par_iter())
        .map(|(&x, &r)| {
            let lo = sorted.partition_point(|&v| x - v >= r);
            let hi = sorted.partition_point(|&v| v - x < r);
            // the point itself lies inside whenever r > 0
            (hi - lo).saturating_sub(usize::from(r > 0.0))
        })
        .collect()
}

const LEAF_SIZE: usize = 16;

enum Node {
    Leaf { start: usize, end: usize },
    Split { dim: usize, value: f64, left: Box<Node>, right: Box<Node> },
}

/// Static k-d tree over the rows of a [`SampleMatrix`].
pub struct KdTree<'a> {
    points: &'a SampleMatrix,
    order: Vec<usize>,
    root: Node,
}

#[derive(PartialEq)]
struct Candidate(f64);

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl<'a> KdTree<'a> {
    pub fn build(points: &'a SampleMatrix) -> Self {
        let mut order: Vec<usize> = (0..points.n()).collect();
        let root = Self::build_node(points, &mut order, 0);
        KdTree { points, order, root }
    }

    fn build_node(points: &SampleMatrix, order: &mut [usize], offset: usize) -> Node {
        let len = order.len();
        if len <= LEAF_SIZE {
            return Node::Leaf { start: offset, end: offset + len };
        }
        // split on the widest dimension
        let dim = (0..points.d())
            .map(|j| {
                let (lo, hi) = order.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                    let v = points.row(i)[j];
                    (lo.min(v), hi.max(v))
                });
                (j, hi - lo)
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(j, _)| j)
            .unwrap_or(0);
        let mid = len / 2;
        order.select_nth_unstable_by(mid, |&a, &b| points.row(a)[dim].total_cmp(&points.row(b)[dim]));
        let value = points.row(order[mid])[dim];
        let (left, right) = order.split_at_mut(mid);
        Node::Split {
            dim,
            value,
            left: Box::new(Self::build_node(points, left, offset)),
            right: Box::new(Self::build_node(points, right, offset + mid)),
        }
    }

    /// Distance from point `i` to its k-th nearest other point.
    pub fn kth_distance(&self, i: usize, k: usize) -> f64 {
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        self.knn(&self.root, i, k, &mut heap);
        heap.peek().map(|c| c.0).unwrap_or(f64::INFINITY)
    }

    fn knn(&self, node: &Node, i: usize, k: usize, heap: &mut BinaryHeap<Candidate>) {
        let query = self.points.row(i);
        match node {
            Node::Leaf { start, end } => {
                for &j in &self.order[*start..*end] {
                    if j == i {
                        continue;
                    }
                    let bound = if heap.len() == k { heap.peek().unwrap().0 } else { f64::INFINITY };
                    if let Some(d) = chebyshev_below(query, self.points.row(j), bound) {
                        heap.push(Candidate(d));
                        if heap.len() > k {
                            heap.pop();
                        }
                    }
                }
            }
            Node::Split { dim, value, left, right } => {
                let diff = query[*dim] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.knn(near, i, k, heap);
                let bound = if heap.len() == k { heap.peek().unwrap().0 } else { f64::INFINITY };
                // points on the far side are at least |diff| away; ties at
                // the bound cannot change the k-th distance
                if diff.abs() <= bound {
                    self.knn(far, i, k, heap);
                }
            }
        }
    }

    /// Number of points j ≠ i strictly within `radius` of point i.
    pub fn count_within(&self, i: usize, radius: f64) -> usize {
        self.count(&self.root, i, radius)
    }

    fn count(&self, node: &Node, i: usize, radius: f64) -> usize {
        let query = self.points.row(i);
        match node {
            Node::Leaf { start, end } => self.order[*start..*end]
                .iter()
                .filter(|&&j| j != i && chebyshev_below(query, self.points.row(j), radius).is_some())
                .count(),
            Node::Split { dim, value, left, right } => {
                let q = query[*dim];
                let mut total = 0;
                // left holds values <= split, right holds values >= split
                if q - value < radius {
                    total += self.count(left, i, radius);
                }
                if value - q < radius {
                    total += self.count(right, i, radius);
                }
                total
            }
        }
    }
}

/// Chebyshev distance between two rows; exposed for tests and oracles.
pub fn max_norm(a: &[f64], b: &[f64]) -> f64 {
    chebyshev(a, b)
}
