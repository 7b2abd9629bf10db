use crate::graph::Graph;
use crate::hop::HopAdjacency;
use crate::sparse::SparseMatrix;

/// `Â`: adjacency plus self-loops, entry `(v,u) = (d_v+1)^{-1/2} (d_u+1)^{-1/2}`
/// for `u ∈ N_1(v) ∪ {v}`.
pub fn self_loop_normalized(graph: &Graph) -> SparseMatrix {
    let n = graph.num_nodes();
    let weight = |v: usize, u: usize| {
        let dv = (graph.degree(v) + 1) as f64;
        let du = (graph.degree(u) + 1) as f64;
        1.0 / (dv * du).sqrt()
    };
    let rows = (0..n)
        .map(|v| {
            let mut row: Vec<(usize, f64)> = graph
                .neighbors(v)
                .iter()
                .map(|&u| (u, weight(v, u)))
                .collect();
            row.push((v, weight(v, v)));
            row
        })
        .collect();
    SparseMatrix::from_rows(n, rows).expect("neighbor ids are in range")
}

/// `Ā_i`: hop-`i` adjacency with entry `d_{i,v}^{-1/2} d_{i,u}^{-1/2}` on its
/// support. Nodes without hop-`i` neighbors get empty rows.
pub fn hop_normalized(hop: &HopAdjacency) -> SparseMatrix {
    // entries exist only where both endpoints have positive hop degree
    hop.matrix
        .map_values(|v, u, _| 1.0 / ((hop.degree(v) * hop.degree(u)) as f64).sqrt())
}
