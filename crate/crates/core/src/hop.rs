//! Exact-distance hop adjacency.
//!
//! `A_i[v, u] = 1` iff the shortest-path distance between `v` and `u` is
//! exactly `i`. Supports of different hops are therefore disjoint, and
//! `A_1` is the graph adjacency.

use rayon::prelude::*;

use crate::graph::Graph;
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct HopAdjacency {
    pub hop: usize,
    /// Boolean |V|×|V| matrix; stored values are 1.0.
    pub matrix: SparseMatrix,
}

impl HopAdjacency {
    /// `N_i(v)`, sorted ascending.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        self.matrix.row_indices(v)
    }

    /// `d_{i,v} = |N_i(v)|`.
    pub fn degree(&self, v: usize) -> usize {
        self.matrix.row_nnz(v)
    }

    pub fn num_nodes(&self) -> usize {
        self.matrix.rows()
    }
}

/// Returns `[A_1, ..., A_max_hop]` via a depth-truncated BFS from every node.
pub fn compute_hop_adjacency(graph: &Graph, max_hop: usize) -> Vec<HopAdjacency> {
    assert!(max_hop >= 1, "max_hop must be at least 1");
    let n = graph.num_nodes();

    // per_source[v][i] = sorted nodes at distance i+1 from v
    let per_source: Vec<Vec<Vec<usize>>> = (0..n)
        .into_par_iter()
        .map_init(
            || vec![usize::MAX; n],
            |seen, source| {
                let mut rings = Vec::with_capacity(max_hop);
                seen[source] = source;
                let mut frontier = vec![source];
                for _ in 0..max_hop {
                    let mut next = Vec::new();
                    for &v in &frontier {
                        for &u in graph.neighbors(v) {
                            if seen[u] != source {
                                seen[u] = source;
                                next.push(u);
                            }
                        }
                    }
                    next.sort_unstable();
                    frontier = next.clone();
                    rings.push(next);
                }
                rings
            },
        )
        .collect();

    (0..max_hop)
        .map(|i| {
            let mut indptr = Vec::with_capacity(n + 1);
            let mut indices = Vec::new();
            indptr.push(0);
            for rings in &per_source {
                indices.extend_from_slice(&rings[i]);
                indptr.push(indices.len());
            }
            HopAdjacency {
                hop: i + 1,
                matrix: SparseMatrix::pattern(n, n, indptr, indices),
            }
        })
        .collect()
}
