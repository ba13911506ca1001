use std::collections::BTreeSet;

use log::warn;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::neighbor::NeighborIndex;

/// Undirected K-nearest-neighbour graph (union of the directed lists).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnnGraph {
    pub adjacency: Vec<Vec<usize>>,
    pub k: usize,
}

impl KnnGraph {
    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }
}

pub fn build_knn_graph(points: &Matrix, k: usize) -> Result<KnnGraph> {
    let index = NeighborIndex::build(points.clone())?;
    knn_graph_from_index(&index, k)
}

pub fn knn_graph_from_index(index: &NeighborIndex, k: usize) -> Result<KnnGraph> {
    let n = index.len();
    if k == 0 || k >= n {
        return Err(Error::TooManyNeighbors {
            requested: k,
            available: n.saturating_sub(1),
        });
    }
    let mut sets = vec![BTreeSet::new(); n];
    for i in 0..n {
        for nb in index.k_nearest_excluding(i, k)? {
            sets[i].insert(nb.index);
            sets[nb.index].insert(i);
        }
    }
    Ok(KnnGraph {
        adjacency: sets.into_iter().map(|s| s.into_iter().collect()).collect(),
        k,
    })
}

/// Interior and border index sets of one coordinate domain.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Domain {
    pub interior: Vec<usize>,
    pub border: Vec<usize>,
}

impl Domain {
    /// Interior followed by border, the order used for chart training data.
    pub fn members(&self) -> Vec<usize> {
        self.interior.iter().chain(&self.border).copied().collect()
    }
}

/// Grow every cluster by breadth-first search over at most `rounds` graph hops.
pub fn expand_clusters(labels: &[usize], n_clusters: usize, graph: &KnnGraph, rounds: usize) -> Result<Vec<Domain>> {
    if labels.len() != graph.len() {
        return Err(Error::DimensionMismatch {
            expected: graph.len(),
            got: labels.len(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= n_clusters) {
        return Err(Error::InvalidArgument(format!("label {bad} out of range for {n_clusters} clusters")));
    }
    let mut domains: Vec<Domain> = (0..n_clusters).map(|_| Domain::default()).collect();
    for (i, &l) in labels.iter().enumerate() {
        domains[l].interior.push(i);
    }
    for (c, dom) in domains.iter_mut().enumerate() {
        let mut seen = vec![false; labels.len()];
        let mut frontier = dom.interior.clone();
        for &i in &frontier {
            seen[i] = true;
        }
        let mut border = Vec::new();
        for _ in 0..rounds {
            let mut next = Vec::new();
            for &i in &frontier {
                for &j in graph.neighbors(i) {
                    if !seen[j] {
                        seen[j] = true;
                        next.push(j);
                        border.push(j);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        debug_assert!(border.iter().all(|&j| labels[j] != c));
        border.sort_unstable();
        dom.border = border;
    }
    for (c, dom) in domains.iter().enumerate() {
        let in_border: BTreeSet<usize> = dom.border.iter().copied().collect();
        for (o, other) in domains.iter().enumerate() {
            if o != c && !other.interior.is_empty() && other.interior.iter().all(|i| in_border.contains(i)) {
                warn!("border of chart {c} contains the whole interior of chart {o}");
            }
        }
    }
    Ok(domains)
}
