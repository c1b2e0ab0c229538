//! Exact 2-d tree for k-nearest-neighbour and radius queries.
//!
//! Results are ordered by `(distance², index)`, so equidistant points always
//! come back lowest-index first and the output matches a brute-force sort.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        dim: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// A neighbour returned by a query: positional index and Euclidean distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<[f64; 2]>,
    perm: Vec<usize>,
    nodes: Vec<Node>,
    root: usize,
}

#[derive(Clone, Copy, PartialEq)]
struct Candidate {
    dist_sq: f64,
    index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist_sq
            .total_cmp(&other.dist_sq)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[inline]
pub(crate) fn dist_sq(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

impl KdTree {
    pub fn build(points: Vec<[f64; 2]>) -> Self {
        let mut tree = KdTree {
            perm: (0..points.len()).collect(),
            points,
            nodes: Vec::new(),
            root: 0,
        };
        let n = tree.points.len();
        tree.root = tree.build_node(0, n);
        tree
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return self.nodes.len() - 1;
        }
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for &i in &self.perm[start..end] {
            let p = self.points[i];
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let dim = if hi[0] - lo[0] >= hi[1] - lo[1] { 0 } else { 1 };
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.perm[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a][dim]
                .total_cmp(&points[b][dim])
                .then(a.cmp(&b))
        });
        let value = self.points[self.perm[mid]][dim];
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes.push(Node::Split {
            dim,
            value,
            left,
            right,
        });
        self.nodes.len() - 1
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, index: usize) -> [f64; 2] {
        self.points[index]
    }

    /// The `k` nearest points to `q`, ascending by `(distance, index)`.
    /// Returns fewer than `k` entries only when the tree holds fewer points.
    pub fn knn(&self, q: [f64; 2], k: usize) -> Vec<Neighbor> {
        if k == 0 || self.points.is_empty() {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.knn_node(self.root, q, k, &mut heap);
        heap.into_sorted_vec()
            .into_iter()
            .map(|c| Neighbor {
                index: c.index,
                distance: c.dist_sq.sqrt(),
            })
            .collect()
    }

    fn knn_node(&self, node: usize, q: [f64; 2], k: usize, heap: &mut BinaryHeap<Candidate>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.perm[start..end] {
                    let cand = Candidate {
                        dist_sq: dist_sq(q, self.points[i]),
                        index: i,
                    };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().expect("heap is full") {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let diff = q[dim] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.knn_node(near, q, k, heap);
                // `<=` keeps equidistant points with a lower index reachable.
                if heap.len() < k || diff * diff <= heap.peek().map_or(f64::INFINITY, |c| c.dist_sq)
                {
                    self.knn_node(far, q, k, heap);
                }
            }
        }
    }

    /// All points with squared distance `<= radius_sq`, ascending by index.
    pub fn within(&self, q: [f64; 2], radius_sq: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if !self.points.is_empty() {
            self.within_node(self.root, q, radius_sq, &mut out);
        }
        out.sort_unstable();
        out
    }

    fn within_node(&self, node: usize, q: [f64; 2], radius_sq: f64, out: &mut Vec<usize>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                out.extend(
                    self.perm[start..end]
                        .iter()
                        .copied()
                        .filter(|&i| dist_sq(q, self.points[i]) <= radius_sq),
                );
            }
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let diff = q[dim] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.within_node(near, q, radius_sq, out);
                if diff * diff <= radius_sq {
                    self.within_node(far, q, radius_sq, out);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(points: &[[f64; 2]], q: [f64; 2], k: usize) -> Vec<Neighbor> {
        let mut all: Vec<Candidate> = points
            .iter()
            .enumerate()
            .map(|(index, &p)| Candidate {
                dist_sq: dist_sq(q, p),
                index,
            })
            .collect();
        all.sort();
        all.truncate(k);
        all.into_iter()
            .map(|c| Neighbor {
                index: c.index,
                distance: c.dist_sq.sqrt(),
            })
            .collect()
    }

    #[test]
    fn collinear_layout() {
        let tree = KdTree::build(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [5.0, 0.0]]);
        let nn = tree.knn([0.0, 0.0], 2);
        assert_eq!(nn.iter().map(|n| n.index).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(nn.iter().map(|n| n.distance).collect::<Vec<_>>(), vec![0.0, 1.0]);
    }

    #[test]
    fn ties_prefer_lower_index() {
        // Many duplicates force ties across leaves.
        let mut pts = vec![[1.0, 1.0]; 40];
        pts.push([0.0, 0.0]);
        let tree = KdTree::build(pts);
        let nn = tree.knn([1.0, 1.0], 5);
        assert_eq!(nn.iter().map(|n| n.index).collect::<Vec<_>>(), vec![0, 1, 2, 3, 4]);

        let tree = KdTree::build(vec![[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]]);
        let nn = tree.knn([0.0, 0.0], 3);
        assert_eq!(nn.iter().map(|n| n.index).collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn within_radius_matches_scan() {
        let pts: Vec<[f64; 2]> = (0..200)
            .map(|i| [(i % 17) as f64 * 0.3, (i / 17) as f64 * 0.7])
            .collect();
        let tree = KdTree::build(pts.clone());
        let q = [2.0, 3.0];
        let expect: Vec<usize> = (0..pts.len())
            .filter(|&i| dist_sq(q, pts[i]) <= 2.25)
            .collect();
        assert_eq!(tree.within(q, 2.25), expect);
    }

    proptest! {
        #[test]
        fn knn_equals_brute_force(
            pts in prop::collection::vec((-50i32..50, -50i32..50), 1..400),
            qx in -60.0f64..60.0,
            qy in -60.0f64..60.0,
            k in 1usize..40,
        ) {
            // Integer grid coordinates produce plenty of exact ties.
            let pts: Vec<[f64; 2]> = pts.into_iter().map(|(x, y)| [x as f64 * 0.5, y as f64 * 0.5]).collect();
            let k = k.min(pts.len());
            let tree = KdTree::build(pts.clone());
            prop_assert_eq!(tree.knn([qx, qy], k), brute(&pts, [qx, qy], k));
            let on_point = pts[pts.len() / 2];
            prop_assert_eq!(tree.knn(on_point, k), brute(&pts, on_point, k));
        }
    }
}
