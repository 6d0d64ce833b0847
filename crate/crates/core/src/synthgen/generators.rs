//! Random-graph families used for synthetic graph instances.
//!
//! Every generator returns canonical undirected edges `(u, v)` with `u < v`.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::Rng;

/// Base ring degree of the Watts-Strogatz lattice.
pub const WS_RING_DEGREE: usize = 4;
/// Each barbell clique holds `⌊n · 3/10⌋` nodes; the connecting path holds the rest.
pub const BARBELL_CLIQUE_NUM: usize = 3;
pub const BARBELL_CLIQUE_DEN: usize = 10;
/// Barabási-Albert attachment count is `⌈p · 10⌉`.
pub const BA_ATTACHMENT_SCALE: f64 = 10.0;

fn edge(u: usize, v: usize) -> (usize, usize) {
    (u.min(v), u.max(v))
}

/// Ring of `n` nodes, each joined to its `k/2` nearest neighbours per side, with
/// every lattice edge rewired to a uniform non-neighbour with probability `p`.
pub fn watts_strogatz<R: Rng + ?Sized>(
    n: usize,
    k: usize,
    p: f64,
    rng: &mut R,
) -> Vec<(usize, usize)> {
    let half = k / 2;
    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    if n < 2 {
        return Vec::new();
    }
    let mut degree = vec![0usize; n];
    for j in 1..=half {
        for u in 0..n {
            let v = (u + j) % n;
            if u != v && edges.insert(edge(u, v)) {
                degree[u] += 1;
                degree[v] += 1;
            }
        }
    }
    for j in 1..=half {
        for u in 0..n {
            if rng.random::<f64>() >= p {
                continue;
            }
            let v = (u + j) % n;
            if !edges.contains(&edge(u, v)) || degree[u] >= n - 1 {
                continue;
            }
            let w = loop {
                let w = rng.random_range(0..n);
                if w != u && !edges.contains(&edge(u, w)) {
                    break w;
                }
            };
            edges.remove(&edge(u, v));
            edges.insert(edge(u, w));
            degree[v] -= 1;
            degree[w] += 1;
        }
    }
    edges.into_iter().collect()
}

/// Complete `r`-ary tree in breadth-first order, truncated to `n` nodes.
pub fn tree(n: usize, branching: usize) -> Vec<(usize, usize)> {
    let r = branching.max(1);
    (1..n).map(|v| ((v - 1) / r, v)).collect()
}

/// `G(n, p)`: every pair independently with probability `p`.
pub fn erdos_renyi<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p {
                out.push((u, v));
            }
        }
    }
    out
}

/// Two equal cliques joined through a path made of the remaining nodes.
pub fn barbell(n: usize) -> Vec<(usize, usize)> {
    let clique = (n * BARBELL_CLIQUE_NUM / BARBELL_CLIQUE_DEN).clamp(1, n / 2);
    let mut out = Vec::new();
    let right = n - clique;
    for u in 0..clique {
        for v in u + 1..clique {
            out.push((u, v));
            out.push((right + u, right + v));
        }
    }
    // Chain clique A's last node through every middle node to clique B's first.
    if n >= 2 {
        out.extend((clique..=right).map(|v| (v - 1, v)));
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Random bipartite graph on parts `⌊n/2⌋` and `⌈n/2⌉` with cross-edge probability `p`.
pub fn bipartite<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Vec<(usize, usize)> {
    let left = n / 2;
    let mut out = Vec::new();
    for u in 0..left {
        for v in left..n {
            if rng.random::<f64>() < p {
                out.push((u, v));
            }
        }
    }
    out
}

/// Preferential attachment: each new node links to `m` distinct existing nodes
/// chosen proportionally to degree, seeded with `m` isolated nodes.
pub fn barabasi_albert<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Vec<(usize, usize)> {
    let m = m.clamp(1, n.saturating_sub(1).max(1));
    if n <= m {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(m * (n - m));
    let mut repeated: Vec<usize> = Vec::with_capacity(2 * m * n);
    let mut targets: Vec<usize> = (0..m).collect();
    for source in m..n {
        for &t in &targets {
            out.push(edge(source, t));
        }
        repeated.extend_from_slice(&targets);
        repeated.extend(std::iter::repeat_n(source, m));
        let mut chosen = BTreeSet::new();
        while chosen.len() < m {
            chosen.insert(repeated[rng.random_range(0..repeated.len())]);
        }
        targets = chosen.into_iter().collect();
    }
    out.sort_unstable();
    out
}

pub fn path(n: usize) -> Vec<(usize, usize)> {
    (1..n).map(|v| (v - 1, v)).collect()
}

/// Number of edges removed for a sampled removal fraction.
pub fn removal_count(fraction: f64, edges: usize) -> usize {
    ((fraction * edges as f64).round() as usize).min(edges)
}

/// Removes `count` edges chosen uniformly without replacement; order is kept.
pub fn remove_edges<R: Rng + ?Sized>(
    edges: Vec<(usize, usize)>,
    count: usize,
    rng: &mut R,
) -> Vec<(usize, usize)> {
    if count == 0 {
        return edges;
    }
    let mut drop = vec![false; edges.len()];
    for i in sample(rng, edges.len(), count) {
        drop[i] = true;
    }
    edges
        .into_iter()
        .zip(drop)
        .filter_map(|(e, d)| (!d).then_some(e))
        .collect()
}
