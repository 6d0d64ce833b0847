//! Synthetic hierarchical-graph benchmark.
//!
//! A 7-class skeleton graph supplies the instance-level edges; each skeleton
//! node is replaced by a graph instance drawn from the random-graph family of
//! its class, after which a random fraction of the instance's edges is removed.

pub mod generators;
mod skeleton;
mod stats;

use std::fmt;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphInstance, HierarchicalGraph, Splits};
use crate::numeric::Tensor;
use crate::par::Exec;

pub use skeleton::{build_skeleton, load_edge_list, Skeleton};
pub use stats::{instance_stats, write_stats_csv, ClassStats};

/// Class counts of the seven generator families, in [`GeneratorKind::ALL`] order.
pub const DEFAULT_CLASS_COUNTS: [usize; 7] = [351, 217, 418, 818, 426, 298, 180];

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic configuration: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    EdgeList {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
}

/// Random-graph family. The class index is the position in [`GeneratorKind::ALL`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GeneratorKind {
    WattsStrogatz,
    Tree,
    ErdosRenyi,
    Barbell,
    Bipartite,
    BarabasiAlbert,
    Path,
}

impl GeneratorKind {
    pub const ALL: [GeneratorKind; 7] = [
        GeneratorKind::WattsStrogatz,
        GeneratorKind::Tree,
        GeneratorKind::ErdosRenyi,
        GeneratorKind::Barbell,
        GeneratorKind::Bipartite,
        GeneratorKind::BarabasiAlbert,
        GeneratorKind::Path,
    ];

    pub fn class(self) -> usize {
        Self::ALL.iter().position(|&k| k == self).expect("listed")
    }

    pub fn from_class(class: usize) -> Option<Self> {
        Self::ALL.get(class).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            GeneratorKind::WattsStrogatz => "WattsStrogatz",
            GeneratorKind::Tree => "Tree",
            GeneratorKind::ErdosRenyi => "ErdosRenyi",
            GeneratorKind::Barbell => "Barbell",
            GeneratorKind::Bipartite => "Bipartite",
            GeneratorKind::BarabasiAlbert => "BarabasiAlbert",
            GeneratorKind::Path => "Path",
        }
    }
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Node attributes attached to generated instances.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureSpec {
    /// `[1, degree / (n − 1)]` per node.
    #[default]
    Degree,
    /// `[1]` per node; structure only.
    Constant,
}

impl FeatureSpec {
    pub fn dim(self) -> usize {
        match self {
            FeatureSpec::Degree => 2,
            FeatureSpec::Constant => 1,
        }
    }

    pub fn features(self, n: usize, edges: &[(usize, usize)]) -> Tensor {
        match self {
            FeatureSpec::Constant => Tensor::filled(n, 1, 1.0),
            FeatureSpec::Degree => {
                let mut deg = vec![0usize; n];
                for &(u, v) in edges {
                    deg[u] += 1;
                    deg[v] += 1;
                }
                let scale = if n > 1 { 1.0 / (n - 1) as f64 } else { 0.0 };
                let data = deg.iter().flat_map(|&d| [1.0, d as f64 * scale]).collect();
                Tensor::new(n, 2, data).expect("two columns per node")
            }
        }
    }
}

/// Where the instance-level edges come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum SkeletonSource {
    /// Whitespace-separated `u v` edge list; node ids are re-indexed in sorted order.
    EdgeList { path: PathBuf },
    /// Random homophilous skeleton.
    Random {
        nodes: usize,
        mean_degree: f64,
        /// Probability that an edge joins two nodes of the same class.
        homophily: f64,
    },
}

impl Default for SkeletonSource {
    fn default() -> Self {
        SkeletonSource::Random {
            nodes: DEFAULT_CLASS_COUNTS.iter().sum(),
            mean_degree: 4.0,
            homophily: 0.8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    /// Inclusive node-count range.
    pub n_range: [usize; 2],
    pub p_range: [f64; 2],
    /// Inclusive tree branching-factor range.
    pub branch_range: [usize; 2],
    pub removal_range: [f64; 2],
    pub class_counts: Vec<usize>,
    pub skeleton: SkeletonSource,
    pub features: FeatureSpec,
    pub labeled: usize,
    pub test: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_range: [100, 200],
            p_range: [0.1, 0.5],
            branch_range: [1, 3],
            removal_range: [0.01, 0.20],
            class_counts: DEFAULT_CLASS_COUNTS.to_vec(),
            skeleton: SkeletonSource::default(),
            features: FeatureSpec::default(),
            labeled: 300,
            test: 1000,
        }
    }
}

impl SynthConfig {
    pub fn total(&self) -> usize {
        self.class_counts.iter().sum()
    }

    pub fn check(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Config(m));
        if self.class_counts.len() != GeneratorKind::ALL.len() {
            return bad(format!(
                "class_counts needs {} entries, got {}",
                GeneratorKind::ALL.len(),
                self.class_counts.len()
            ));
        }
        let [lo, hi] = self.n_range;
        if lo < 1 || lo > hi {
            return bad(format!("n_range [{lo}, {hi}] is empty or starts below 1"));
        }
        let [lo, hi] = self.branch_range;
        if lo < 1 || lo > hi {
            return bad(format!(
                "branch_range [{lo}, {hi}] is empty or starts below 1"
            ));
        }
        for (name, [lo, hi]) in [
            ("p_range", self.p_range),
            ("removal_range", self.removal_range),
        ] {
            if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
                return bad(format!(
                    "{name} [{lo}, {hi}] must be a sub-interval of [0, 1]"
                ));
            }
        }
        if let SkeletonSource::Random {
            nodes,
            mean_degree,
            homophily,
        } = &self.skeleton
        {
            if *nodes != self.total() {
                return bad(format!(
                    "class_counts sum to {} but the skeleton has {nodes} nodes",
                    self.total()
                ));
            }
            if mean_degree.is_nan() || *mean_degree < 0.0 || !(0.0..=1.0).contains(homophily) {
                return bad("skeleton mean_degree must be ≥ 0 and homophily in [0, 1]".into());
            }
        }
        if self.labeled + self.test > self.total() {
            return bad(format!(
                "labeled ({}) + test ({}) exceeds {} instances",
                self.labeled,
                self.test,
                self.total()
            ));
        }
        Ok(())
    }
}

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const SKELETON_STREAM: u64 = 0;
const SPLIT_STREAM: u64 = 1;
const INSTANCE_STREAM_BASE: u64 = 1 << 32;

fn uniform_f64<R: Rng + ?Sized>(rng: &mut R, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

/// Draws one instance of `kind`. The result carries `id = 0`; callers assign ids.
pub fn gen_instance<R: Rng + ?Sized>(
    kind: GeneratorKind,
    cfg: &SynthConfig,
    rng: &mut R,
) -> GraphInstance {
    let n = rng.random_range(cfg.n_range[0]..=cfg.n_range[1]);
    let edges = match kind {
        GeneratorKind::WattsStrogatz => {
            let p = uniform_f64(rng, cfg.p_range);
            generators::watts_strogatz(n, generators::WS_RING_DEGREE, p, rng)
        }
        GeneratorKind::Tree => {
            let r = rng.random_range(cfg.branch_range[0]..=cfg.branch_range[1]);
            generators::tree(n, r)
        }
        GeneratorKind::ErdosRenyi => {
            let p = uniform_f64(rng, cfg.p_range);
            generators::erdos_renyi(n, p, rng)
        }
        GeneratorKind::Barbell => generators::barbell(n),
        GeneratorKind::Bipartite => {
            let p = uniform_f64(rng, cfg.p_range);
            generators::bipartite(n, p, rng)
        }
        GeneratorKind::BarabasiAlbert => {
            let p = uniform_f64(rng, cfg.p_range);
            let m = (p * generators::BA_ATTACHMENT_SCALE).ceil().max(1.0) as usize;
            generators::barabasi_albert(n, m, rng)
        }
        GeneratorKind::Path => generators::path(n),
    };
    let fraction = uniform_f64(rng, cfg.removal_range);
    let count = generators::removal_count(fraction, edges.len());
    let edges = generators::remove_edges(edges, count, rng);
    let features = cfg.features.features(n, &edges);
    GraphInstance::new(0, n, edges, features, Some(kind.class())).with_tag(kind.name())
}

/// Builds the full benchmark dataset. Each instance uses its own RNG stream
/// derived from `(seed, instance index)`, so the output does not depend on `exec`.
pub fn synthesize_dataset(cfg: &SynthConfig, exec: Exec) -> Result<HierarchicalGraph, SynthError> {
    cfg.check()?;
    let skeleton = build_skeleton(cfg, &mut stream_rng(cfg.seed, SKELETON_STREAM))?;
    let instances = exec.map_range(skeleton.classes.len(), |i| {
        let kind = GeneratorKind::from_class(skeleton.classes[i]).expect("class below 7");
        let mut rng = stream_rng(cfg.seed, INSTANCE_STREAM_BASE + i as u64);
        GraphInstance {
            id: i,
            ..gen_instance(kind, cfg, &mut rng)
        }
    });
    let mut order: Vec<usize> = (0..instances.len()).collect();
    order.shuffle(&mut stream_rng(cfg.seed, SPLIT_STREAM));
    let mut labeled = order[..cfg.labeled].to_vec();
    let mut test = order[cfg.labeled..cfg.labeled + cfg.test].to_vec();
    let mut unlabeled = order[cfg.labeled + cfg.test..].to_vec();
    labeled.sort_unstable();
    test.sort_unstable();
    unlabeled.sort_unstable();
    Ok(HierarchicalGraph {
        instances,
        hier_edges: skeleton.edges,
        num_classes: GeneratorKind::ALL.len(),
        splits: Splits {
            labeled,
            unlabeled,
            test,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg(seed: u64) -> SynthConfig {
        let counts = vec![4, 3, 3, 5, 3, 2, 2];
        SynthConfig {
            seed,
            n_range: [20, 30],
            skeleton: SkeletonSource::Random {
                nodes: counts.iter().sum(),
                mean_degree: 3.0,
                homophily: 0.8,
            },
            class_counts: counts,
            labeled: 6,
            test: 8,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn kind_class_bijection() {
        for (i, k) in GeneratorKind::ALL.iter().enumerate() {
            assert_eq!(k.class(), i);
            assert_eq!(GeneratorKind::from_class(i), Some(*k));
        }
        assert_eq!(GeneratorKind::from_class(7), None);
    }

    #[test]
    fn path_without_removal_has_n_minus_one_edges() {
        let cfg = SynthConfig {
            n_range: [175, 175],
            removal_range: [0.0, 0.0],
            ..SynthConfig::default()
        };
        let g = gen_instance(GeneratorKind::Path, &cfg, &mut stream_rng(1, 2));
        assert_eq!(g.n, 175);
        assert_eq!(g.edges.len(), 174);
    }

    #[test]
    fn tree_draws_are_forests() {
        let cfg = SynthConfig::default();
        let mut rng = stream_rng(2, 0);
        for _ in 0..50 {
            let g = gen_instance(GeneratorKind::Tree, &cfg, &mut rng);
            assert!(g.edges.len() < g.n);
        }
    }

    #[test]
    fn instances_respect_ranges_and_labels() {
        let cfg = SynthConfig::default();
        let mut rng = stream_rng(3, 0);
        for kind in GeneratorKind::ALL {
            for _ in 0..5 {
                let g = gen_instance(kind, &cfg, &mut rng);
                assert!((100..=200).contains(&g.n));
                assert_eq!(g.label, Some(kind.class()));
                assert_eq!(g.features.shape(), (g.n, 2));
            }
        }
    }

    #[test]
    fn removal_stays_within_bounds() {
        // Regenerate the pre-removal edge count from the same stream to compare.
        let cfg = SynthConfig::default();
        for kind in [
            GeneratorKind::Path,
            GeneratorKind::Barbell,
            GeneratorKind::Tree,
        ] {
            for s in 0..20 {
                let g = gen_instance(kind, &cfg, &mut stream_rng(s, 9));
                let full = match kind {
                    GeneratorKind::Path | GeneratorKind::Tree => g.n - 1,
                    _ => generators::barbell(g.n).len(),
                };
                let removed = full - g.edges.len();
                let lo = generators::removal_count(0.01, full);
                let hi = generators::removal_count(0.20, full);
                assert!(
                    (lo..=hi).contains(&removed),
                    "{kind}: removed {removed} of {full}"
                );
            }
        }
    }

    #[test]
    fn small_dataset_is_valid_and_deterministic() {
        let a = synthesize_dataset(&small_cfg(5), Exec::Parallel).unwrap();
        let b = synthesize_dataset(&small_cfg(5), Exec::Sequential).unwrap();
        assert_eq!(a, b);
        assert!(a.validate().is_empty(), "{:?}", a.validate());
        assert_eq!(a.len(), 22);
        assert_eq!(a.splits.labeled.len(), 6);
        assert_eq!(a.splits.test.len(), 8);
        assert_eq!(a.splits.unlabeled.len(), 8);
        let c = synthesize_dataset(&small_cfg(6), Exec::Parallel).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn inconsistent_counts_are_config_errors() {
        let mut cfg = small_cfg(0);
        cfg.class_counts[0] += 1;
        assert!(matches!(cfg.check(), Err(SynthError::Config(m)) if m.contains("sum to")));
        let mut cfg = small_cfg(0);
        cfg.class_counts.pop();
        assert!(cfg.check().is_err());
        let mut cfg = small_cfg(0);
        cfg.labeled = 100;
        assert!(cfg.check().is_err());
    }

    #[test]
    fn degree_features() {
        let f = FeatureSpec::Degree.features(3, &[(0, 1), (1, 2)]);
        assert_eq!(f.data(), &[1.0, 0.5, 1.0, 1.0, 1.0, 0.5]);
        assert_eq!(FeatureSpec::Degree.features(1, &[]).data(), &[1.0, 0.0]);
    }
}
