//! Exact nearest-neighbour search in Euclidean space.
//!
//! Results are ordered by `(squared distance, index)`, so equidistant points
//! resolve to the lower index everywhere (kd-tree and brute force alike).

use std::cmp::Ordering;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{sq_dist, Matrix};

const LEAF_SIZE: usize = 8;
/// Above this dimension the tree stops paying for itself.
pub const BRUTE_FORCE_DIM: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist_sq: f64,
}

impl Neighbor {
    pub fn dist(&self) -> f64 {
        self.dist_sq.sqrt()
    }

    fn cmp_key(&self, other: &Neighbor) -> Ordering {
        self.dist_sq
            .total_cmp(&other.dist_sq)
            .then(self.index.cmp(&other.index))
    }
}

/// Sorted list of the best `k` candidates seen so far.
struct Best {
    k: usize,
    items: Vec<Neighbor>,
}

impl Best {
    fn new(k: usize) -> Self {
        Best {
            k,
            items: Vec::with_capacity(k + 1),
        }
    }

    fn worst(&self) -> f64 {
        if self.items.len() < self.k {
            f64::INFINITY
        } else {
            self.items[self.k - 1].dist_sq
        }
    }

    fn offer(&mut self, n: Neighbor) {
        if self.items.len() == self.k && n.cmp_key(&self.items[self.k - 1]) != Ordering::Less {
            return;
        }
        let pos = self
            .items
            .partition_point(|m| m.cmp_key(&n) == Ordering::Less);
        self.items.insert(pos, n);
        self.items.truncate(self.k);
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf(Vec<usize>),
    Split {
        dim: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
pub struct KdTree {
    points: Matrix,
    nodes: Vec<Node>,
}

impl KdTree {
    pub fn build(points: Matrix) -> Result<Self> {
        if points.rows() == 0 {
            return Err(Error::EmptyInput("point set"));
        }
        if points.cols() == 0 {
            return Err(Error::InvalidArgument("points have zero dimension".into()));
        }
        let mut tree = KdTree {
            points,
            nodes: Vec::new(),
        };
        let idx: Vec<usize> = (0..tree.points.rows()).collect();
        tree.build_node(idx);
        Ok(tree)
    }

    fn build_node(&mut self, mut idx: Vec<usize>) -> usize {
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf(Vec::new()));
        if idx.len() <= LEAF_SIZE {
            self.nodes[slot] = Node::Leaf(idx);
            return slot;
        }
        let dims = self.points.cols();
        let mut best_dim = 0;
        let mut best_spread = -1.0;
        for d in 0..dims {
            let (lo, hi) = idx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                let v = self.points.get(i, d);
                (lo.min(v), hi.max(v))
            });
            if hi - lo > best_spread {
                best_spread = hi - lo;
                best_dim = d;
            }
        }
        if best_spread <= 0.0 {
            self.nodes[slot] = Node::Leaf(idx);
            return slot;
        }
        let mid = idx.len() / 2;
        let pts = &self.points;
        idx.select_nth_unstable_by(mid, |&a, &b| {
            pts.get(a, best_dim).total_cmp(&pts.get(b, best_dim))
        });
        let value = self.points.get(idx[mid], best_dim);
        let right_idx = idx.split_off(mid);
        let left = self.build_node(idx);
        let right = self.build_node(right_idx);
        self.nodes[slot] = Node::Split {
            dim: best_dim,
            value,
            left,
            right,
        };
        slot
    }

    pub fn points(&self) -> &Matrix {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    fn search(&self, node: usize, q: &[f64], skip: Option<usize>, best: &mut Best) {
        match &self.nodes[node] {
            Node::Leaf(idx) => {
                for &i in idx {
                    if Some(i) == skip {
                        continue;
                    }
                    best.offer(Neighbor {
                        index: i,
                        dist_sq: sq_dist(q, self.points.row(i)),
                    });
                }
            }
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let diff = q[*dim] - value;
                let (near, far) = if diff < 0.0 {
                    (*left, *right)
                } else {
                    (*right, *left)
                };
                self.search(near, q, skip, best);
                // Equality is explored so that index tie-breaks stay exact.
                if diff * diff <= best.worst() {
                    self.search(far, q, skip, best);
                }
            }
        }
    }

    pub fn nearest(&self, q: &[f64]) -> Result<Neighbor> {
        Ok(self.k_nearest(q, 1)?[0])
    }

    pub fn k_nearest(&self, q: &[f64], k: usize) -> Result<Vec<Neighbor>> {
        self.query(q, k, None)
    }

    /// `k` nearest points to stored point `i`, excluding `i` itself.
    pub fn k_nearest_excluding(&self, i: usize, k: usize) -> Result<Vec<Neighbor>> {
        let q = self.points.row(i).to_vec();
        self.query(&q, k, Some(i))
    }

    fn query(&self, q: &[f64], k: usize, skip: Option<usize>) -> Result<Vec<Neighbor>> {
        check_dim(self.dim(), q.len())?;
        let available = self.len() - usize::from(skip.is_some());
        if k == 0 || k > available {
            return Err(Error::TooManyNeighbors {
                requested: k,
                available,
            });
        }
        let mut best = Best::new(k);
        self.search(0, q, skip, &mut best);
        Ok(best.items)
    }
}

/// Exhaustive scan with the same ordering as the tree.
pub fn brute_force_k_nearest(
    points: &Matrix,
    q: &[f64],
    k: usize,
    skip: Option<usize>,
) -> Result<Vec<Neighbor>> {
    check_dim(points.cols(), q.len())?;
    let available = points.rows() - usize::from(skip.is_some_and(|s| s < points.rows()));
    if k == 0 || k > available {
        return Err(Error::TooManyNeighbors {
            requested: k,
            available,
        });
    }
    let mut best = Best::new(k);
    for (i, row) in points.iter_rows().enumerate() {
        if Some(i) != skip {
            best.offer(Neighbor {
                index: i,
                dist_sq: sq_dist(q, row),
            });
        }
    }
    Ok(best.items)
}

/// A kd-tree in low dimension, brute force otherwise.
#[derive(Debug, Clone)]
pub enum NeighborIndex {
    Tree(KdTree),
    Brute(Matrix),
}

impl NeighborIndex {
    pub fn build(points: Matrix) -> Result<Self> {
        if points.rows() == 0 {
            return Err(Error::EmptyInput("point set"));
        }
        if points.cols() > BRUTE_FORCE_DIM {
            Ok(NeighborIndex::Brute(points))
        } else {
            Ok(NeighborIndex::Tree(KdTree::build(points)?))
        }
    }

    pub fn points(&self) -> &Matrix {
        match self {
            NeighborIndex::Tree(t) => t.points(),
            NeighborIndex::Brute(p) => p,
        }
    }

    pub fn len(&self) -> usize {
        self.points().rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn nearest(&self, q: &[f64]) -> Result<Neighbor> {
        Ok(self.k_nearest(q, 1)?[0])
    }

    pub fn k_nearest(&self, q: &[f64], k: usize) -> Result<Vec<Neighbor>> {
        match self {
            NeighborIndex::Tree(t) => t.k_nearest(q, k),
            NeighborIndex::Brute(p) => brute_force_k_nearest(p, q, k, None),
        }
    }

    pub fn k_nearest_excluding(&self, i: usize, k: usize) -> Result<Vec<Neighbor>> {
        match self {
            NeighborIndex::Tree(t) => t.k_nearest_excluding(i, k),
            NeighborIndex::Brute(p) => brute_force_k_nearest(p, p.row(i), k, Some(i)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid() -> Matrix {
        let mut rows = Vec::new();
        for i in 0..10 {
            for j in 0..10 {
                rows.push(vec![i as f64, j as f64]);
            }
        }
        Matrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn ties_go_to_lower_index() {
        let tree = KdTree::build(grid()).unwrap();
        // (4.5, 4.5) is equidistant from four grid points: 44, 45, 54, 55.
        let got = tree.k_nearest(&[4.5, 4.5], 4).unwrap();
        let idx: Vec<usize> = got.iter().map(|n| n.index).collect();
        assert_eq!(idx, vec![44, 45, 54, 55]);
        assert_eq!(tree.nearest(&[4.5, 4.5]).unwrap().index, 44);
    }

    #[test]
    fn duplicates_resolve_by_index() {
        let pts = Matrix::from_rows(&vec![vec![1.0, 1.0]; 20]).unwrap();
        let tree = KdTree::build(pts).unwrap();
        let idx: Vec<usize> = tree.k_nearest(&[0.0, 0.0], 3).unwrap().iter().map(|n| n.index).collect();
        assert_eq!(idx, vec![0, 1, 2]);
        let ex: Vec<usize> = tree.k_nearest_excluding(0, 2).unwrap().iter().map(|n| n.index).collect();
        assert_eq!(ex, vec![1, 2]);
    }

    #[test]
    fn too_many_neighbors() {
        let tree = KdTree::build(Matrix::from_rows(&[[0.0], [1.0]]).unwrap()).unwrap();
        assert!(matches!(
            tree.k_nearest_excluding(0, 2),
            Err(Error::TooManyNeighbors { requested: 2, available: 1 })
        ));
        assert!(tree.k_nearest(&[0.0], 2).is_ok());
        assert!(tree.k_nearest(&[0.0, 1.0], 1).is_err());
    }

    #[test]
    fn high_dim_uses_brute_force() {
        let pts = Matrix::zeros(5, BRUTE_FORCE_DIM + 1);
        assert!(matches!(NeighborIndex::build(pts).unwrap(), NeighborIndex::Brute(_)));
    }

    fn cloud(dim: usize) -> impl Strategy<Value = (Matrix, Vec<f64>)> {
        (1usize..120).prop_flat_map(move |n| {
            (
                proptest::collection::vec(-3i32..3, n * dim),
                proptest::collection::vec(-30i32..30, dim),
            )
                .prop_map(move |(data, q)| {
                    // Coarse integer lattice makes exact ties common.
                    let data = data.into_iter().map(f64::from).collect();
                    let q = q.into_iter().map(|v| f64::from(v) / 10.0).collect();
                    (Matrix::from_vec(n, dim, data).unwrap(), q)
                })
        })
    }

    proptest! {
        #[test]
        fn tree_matches_brute_force((pts, q) in (1usize..5).prop_flat_map(cloud), k in 1usize..6) {
            let k = k.min(pts.rows());
            let tree = KdTree::build(pts.clone()).unwrap();
            prop_assert_eq!(tree.k_nearest(&q, k).unwrap(), brute_force_k_nearest(&pts, &q, k, None).unwrap());
        }

        #[test]
        fn excluding_self_matches_brute_force((pts, _q) in cloud(3), k in 1usize..4, i in any::<prop::sample::Index>()) {
            prop_assume!(pts.rows() > k);
            let i = i.index(pts.rows());
            let tree = KdTree::build(pts.clone()).unwrap();
            let want = brute_force_k_nearest(&pts, pts.row(i), k, Some(i)).unwrap();
            prop_assert_eq!(tree.k_nearest_excluding(i, k).unwrap(), want);
        }
    }
}
