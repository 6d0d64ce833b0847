//! Graph instances, hierarchical graphs and their invariants.

mod adjacency;
mod io;

use std::collections::BTreeSet;
use std::fmt;

use crate::numeric::Tensor;

pub use adjacency::{normalize_adjacency, normalized_operator};
pub use io::{
    load_dataset, read_dataset, save_dataset, write_dataset, DatasetError, SCHEMA_VERSION,
};

/// One inner graph: a node of the hierarchical graph.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphInstance {
    pub id: usize,
    pub n: usize,
    /// Undirected edges, each stored once as `(u, v)` with `u < v`, sorted.
    pub edges: Vec<(usize, usize)>,
    /// `n × d` node attributes.
    pub features: Tensor,
    pub label: Option<usize>,
    pub generator_tag: Option<String>,
}

impl GraphInstance {
    /// Builds an instance with its edge list put in canonical form: each pair
    /// oriented `u ≤ v`, sorted and deduplicated. Self-loops are kept so that
    /// [`HierarchicalGraph::validate`] can report them.
    pub fn new(
        id: usize,
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        features: Tensor,
        label: Option<usize>,
    ) -> Self {
        Self {
            id,
            n,
            edges: canonical_edges(edges),
            features,
            label,
            generator_tag: None,
        }
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.generator_tag = Some(tag.into());
        self
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(u, v) in &self.edges {
            if u < self.n && v < self.n && u != v {
                deg[u] += 1;
                deg[v] += 1;
            }
        }
        deg
    }

    /// `2|E| / (n(n−1))`; zero for single-node instances.
    pub fn density(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        2.0 * self.edges.len() as f64 / (self.n * (self.n - 1)) as f64
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }
}

pub(crate) fn canonical_edges(
    edges: impl IntoIterator<Item = (usize, usize)>,
) -> Vec<(usize, usize)> {
    let set: BTreeSet<(usize, usize)> = edges
        .into_iter()
        .map(|(u, v)| (u.min(v), u.max(v)))
        .collect();
    set.into_iter().collect()
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Splits {
    pub labeled: Vec<usize>,
    pub unlabeled: Vec<usize>,
    pub test: Vec<usize>,
}

/// Graph of graphs: instances connected by instance-level edges.
#[derive(Clone, Debug, PartialEq)]
pub struct HierarchicalGraph {
    pub instances: Vec<GraphInstance>,
    /// Instance-index pairs `(i, j)` with `i < j`, sorted.
    pub hier_edges: Vec<(usize, usize)>,
    pub num_classes: usize,
    pub splits: Splits,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    /// Instance id, when the violation belongs to one instance.
    pub instance: Option<usize>,
    pub reason: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.instance {
            Some(id) => write!(f, "instance {id}: {}", self.reason),
            None => f.write_str(&self.reason),
        }
    }
}

impl HierarchicalGraph {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Number of labeled instances `L`.
    pub fn num_labeled(&self) -> usize {
        self.splits.labeled.len()
    }

    /// Number of unlabeled instances `U`.
    pub fn num_unlabeled(&self) -> usize {
        self.splits.unlabeled.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.instances.first().map_or(0, GraphInstance::feature_dim)
    }

    /// Ground-truth label of instance index `i`.
    pub fn label(&self, i: usize) -> Option<usize> {
        self.instances.get(i).and_then(|g| g.label)
    }

    /// Every invariant violation; empty when the dataset is well formed.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let c = self.num_classes;
        let d = self.feature_dim();
        for g in &self.instances {
            let mut bad = |reason: String| {
                out.push(Violation {
                    instance: Some(g.id),
                    reason,
                })
            };
            if g.n == 0 {
                bad("empty instance: n must be at least 1".into());
            }
            let mut seen = BTreeSet::new();
            for &(u, v) in &g.edges {
                if u >= g.n || v >= g.n {
                    bad(format!(
                        "edge ({u},{v}) endpoint out of range for n={}",
                        g.n
                    ));
                }
                if u == v {
                    bad(format!("self-loop ({u},{v})"));
                } else if u > v {
                    bad(format!("edge ({u},{v}) not stored as u<v"));
                }
                if !seen.insert((u.min(v), u.max(v))) {
                    bad(format!("duplicate edge ({u},{v})"));
                }
            }
            if g.features.rows() != g.n {
                bad(format!(
                    "feature matrix has {} rows, expected n={}",
                    g.features.rows(),
                    g.n
                ));
            }
            if g.features.cols() != d {
                bad(format!(
                    "feature width {} differs from dataset width {d}",
                    g.features.cols()
                ));
            }
            if let Some(y) = g.label {
                if y >= c {
                    bad(format!("label {y} not below num_classes={c}"));
                }
            }
        }
        let n = self.instances.len();
        let mut seen = BTreeSet::new();
        for &(i, j) in &self.hier_edges {
            let mut bad = |reason: String| {
                out.push(Violation {
                    instance: None,
                    reason,
                })
            };
            if i >= n || j >= n {
                bad(format!(
                    "hierarchy edge ({i},{j}) out of range for {n} instances"
                ));
            }
            if i == j {
                bad(format!("hierarchy self-loop ({i},{j})"));
            }
            if !seen.insert((i.min(j), i.max(j))) {
                bad(format!("duplicate hierarchy edge ({i},{j})"));
            }
        }
        let named = [
            ("labeled", &self.splits.labeled),
            ("unlabeled", &self.splits.unlabeled),
            ("test", &self.splits.test),
        ];
        let mut owner: Vec<Option<&str>> = vec![None; n];
        for (name, ids) in named {
            for &i in ids.iter() {
                if i >= n {
                    out.push(Violation {
                        instance: None,
                        reason: format!("{name} split index {i} out of range"),
                    });
                    continue;
                }
                if let Some(prev) = owner[i] {
                    out.push(Violation {
                        instance: Some(self.instances[i].id),
                        reason: format!("appears in both {prev} and {name} splits"),
                    });
                }
                owner[i] = Some(name);
                if name != "unlabeled" && self.instances[i].label.is_none() {
                    out.push(Violation {
                        instance: Some(self.instances[i].id),
                        reason: format!("missing label for {name} instance"),
                    });
                }
            }
        }
        out
    }
}
