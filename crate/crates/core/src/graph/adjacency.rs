use crate::numeric::{SparseMatrix, Tensor};

use super::{canonical_edges, GraphInstance};

/// `D̃^{-1/2} (A + I) D̃^{-1/2}` for an undirected 0/1 adjacency over `n` nodes.
///
/// Self-loops and duplicate pairs in `edges` are ignored; every node receives
/// exactly one self-loop from `I`.
pub fn normalized_operator(n: usize, edges: &[(usize, usize)]) -> SparseMatrix {
    let edges: Vec<(usize, usize)> = canonical_edges(edges.iter().copied())
        .into_iter()
        .filter(|&(u, v)| u != v && v < n)
        .collect();
    let mut degree = vec![1.0f64; n];
    for &(u, v) in &edges {
        degree[u] += 1.0;
        degree[v] += 1.0;
    }
    let mut triplets = Vec::with_capacity(n + 2 * edges.len());
    for (i, d) in degree.iter().enumerate() {
        triplets.push((i, i, 1.0 / d));
    }
    for &(u, v) in &edges {
        let w = 1.0 / (degree[u] * degree[v]).sqrt();
        triplets.push((u, v, w));
        triplets.push((v, u, w));
    }
    SparseMatrix::from_triplets(n, n, triplets).expect("edge endpoints filtered to range")
}

/// Dense renormalized adjacency of one instance.
pub fn normalize_adjacency(g: &GraphInstance) -> Tensor {
    normalized_operator(g.n, &g.edges).to_dense()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn instance(n: usize, edges: Vec<(usize, usize)>) -> GraphInstance {
        GraphInstance::new(0, n, edges, Tensor::zeros(n, 1), None)
    }

    #[test]
    fn isolated_node_normalizes_to_one() {
        assert_eq!(normalize_adjacency(&instance(1, vec![])).data(), &[1.0]);
    }

    #[test]
    fn single_edge_normalizes_to_halves() {
        assert_eq!(
            normalize_adjacency(&instance(2, vec![(0, 1)])).data(),
            &[0.5, 0.5, 0.5, 0.5]
        );
    }

    /// Dense oracle: build A + I, degrees, and the two diagonal scalings explicitly.
    fn dense_oracle(n: usize, edges: &[(usize, usize)]) -> Tensor {
        let mut a = Tensor::eye(n);
        for &(u, v) in edges {
            a.set(u, v, 1.0);
            a.set(v, u, 1.0);
        }
        let mut d_inv_sqrt = Tensor::zeros(n, n);
        for i in 0..n {
            let deg: f64 = a.row(i).iter().sum();
            d_inv_sqrt.set(i, i, deg.powf(-0.5));
        }
        d_inv_sqrt.matmul(&a).unwrap().matmul(&d_inv_sqrt).unwrap()
    }

    #[test]
    fn random_graph_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..20 {
            let n = 10;
            let edges: Vec<(usize, usize)> = (0..n)
                .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
                .filter(|_| rng.random::<f64>() < 0.3)
                .collect();
            let got = normalize_adjacency(&instance(n, edges.clone()));
            let want = dense_oracle(n, &edges);
            assert!(got.max_abs_diff(&want) < 1e-15);
            assert!(got.max_abs_diff(&got.transpose()) < 1e-12);
            for i in 0..n {
                assert!(got.get(i, i) > 0.0);
                assert!(got.row(i).iter().sum::<f64>() <= n as f64);
            }
        }
    }
}
