//! Static kd-tree with exact k-nearest-neighbor queries.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{invalid, Error, Result};
use crate::geometry::Point3;

pub const DEFAULT_LEAF_SIZE: usize = 16;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: u32, end: u32 },
    Split { axis: u8, value: f64, left: u32, right: u32 },
}

/// Balanced kd-tree over indexed points. Immutable once built.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Point3>,
    // permutation of point indices; leaves own contiguous ranges
    order: Vec<u32>,
    nodes: Vec<Node>,
    leaf_size: usize,
}

/// Candidate ordered by (squared distance, index) so ties resolve to the
/// smaller index.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    dist2: f64,
    index: u32,
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

impl KdTree {
    /// Builds the tree by recursive median splits along the widest axis.
    pub fn build(points: &[Point3], leaf_size: usize) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyPointCloud);
        }
        if leaf_size == 0 {
            return Err(invalid("leaf_size", "must be at least 1"));
        }
        let mut tree = KdTree {
            points: points.to_vec(),
            order: (0..points.len() as u32).collect(),
            nodes: Vec::with_capacity(2 * points.len() / leaf_size + 1),
            leaf_size,
        };
        tree.build_node(0, points.len());
        Ok(tree)
    }

    fn build_node(&mut self, start: usize, end: usize) -> u32 {
        let id = self.nodes.len() as u32;
        if end - start <= self.leaf_size {
            self.nodes.push(Node::Leaf { start: start as u32, end: end as u32 });
            return id;
        }
        // widest axis of the range's bounding box
        let (mut lo, mut hi) = ([f64::INFINITY; 3], [f64::NEG_INFINITY; 3]);
        for &i in &self.order[start..end] {
            let p = self.points[i as usize].to_array();
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])).then(b.cmp(&a)))
            .unwrap();
        let mid = start + (end - start) / 2;
        let pts = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&i, &j| {
            pts[i as usize][axis]
                .total_cmp(&pts[j as usize][axis])
                .then(i.cmp(&j))
        });
        let value = pts[self.order[mid] as usize][axis];
        self.nodes.push(Node::Split { axis: axis as u8, value, left: 0, right: 0 });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        if let Node::Split { left: l, right: r, .. } = &mut self.nodes[id as usize] {
            *l = left;
            *r = right;
        }
        id
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn leaf_size(&self) -> usize {
        self.leaf_size
    }

    /// Number of node levels on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], id: u32) -> usize {
            match nodes[id as usize] {
                Node::Leaf { .. } => 1,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }

    /// Point indices in left-to-right leaf order.
    pub fn leaf_order(&self) -> Vec<usize> {
        fn go(tree: &KdTree, id: u32, out: &mut Vec<usize>) {
            match tree.nodes[id as usize] {
                Node::Leaf { start, end } => {
                    out.extend(tree.order[start as usize..end as usize].iter().map(|&i| i as usize))
                }
                Node::Split { left, right, .. } => {
                    go(tree, left, out);
                    go(tree, right, out);
                }
            }
        }
        let mut out = Vec::with_capacity(self.len());
        go(self, 0, &mut out);
        out
    }

    /// The `min(k, n)` nearest points to `query` as `(index, distance)`, sorted
    /// by distance then index.
    pub fn knn(&self, query: Point3, k: usize) -> Vec<(usize, f64)> {
        let mut out = Vec::with_capacity(k.min(self.len()));
        self.knn_into(query, k, &mut out);
        out
    }

    /// Like [`KdTree::knn`], reusing `out`.
    pub fn knn_into(&self, query: Point3, k: usize, out: &mut Vec<(usize, f64)>) {
        out.clear();
        if k == 0 {
            return;
        }
        let k = k.min(self.len());
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.search(0, query, k, &mut heap);
        let mut found = heap.into_vec();
        found.sort_unstable();
        out.extend(found.into_iter().map(|c| (c.index as usize, c.dist2.sqrt())));
    }

    fn search(&self, id: u32, q: Point3, k: usize, heap: &mut BinaryHeap<Candidate>) {
        match self.nodes[id as usize] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start as usize..end as usize] {
                    let c = Candidate { dist2: self.points[i as usize].distance_squared(q), index: i };
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis as usize] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, k, heap);
                // points equal to the split value can sit on either side, so ties
                // at the plane must still be visited
                if heap.len() < k || diff * diff <= heap.peek().unwrap().dist2 {
                    self.search(far, q, k, heap);
                }
            }
        }
    }
}

/// Exhaustive k-nearest search with the same ordering contract as the tree.
pub fn brute_force_knn(points: &[Point3], query: Point3, k: usize) -> Vec<(usize, f64)> {
    let mut all: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| (p.distance_squared(query), i))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    all.truncate(k);
    all.into_iter().map(|(d, i)| (i, d.sqrt())).collect()
}
