use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{SkeletonSource, SynthConfig, SynthError};

/// Instance-level graph with one class per node.
#[derive(Clone, Debug, PartialEq)]
pub struct Skeleton {
    pub edges: Vec<(usize, usize)>,
    pub classes: Vec<usize>,
}

/// Reads `u v` pairs, one per line. Blank lines and `#` comments are skipped.
/// Node ids are re-indexed to `0..count` in ascending id order.
pub fn load_edge_list(path: &Path) -> Result<(usize, Vec<(usize, usize)>), SynthError> {
    let text = fs::read_to_string(path).map_err(|source| SynthError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut raw = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |reason: String| SynthError::EdgeList {
            path: path.display().to_string(),
            line: k + 1,
            reason,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(err(format!(
                "expected two node ids, found {}",
                fields.len()
            )));
        }
        let parse = |s: &str| {
            s.parse::<u64>()
                .map_err(|e| err(format!("bad node id {s:?}: {e}")))
        };
        raw.push((parse(fields[0])?, parse(fields[1])?));
    }
    let ids: BTreeSet<u64> = raw.iter().flat_map(|&(u, v)| [u, v]).collect();
    let index: BTreeMap<u64, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let edges: BTreeSet<(usize, usize)> = raw
        .iter()
        .map(|(u, v)| (index[u], index[v]))
        .filter(|(u, v)| u != v)
        .map(|(u, v)| (u.min(v), u.max(v)))
        .collect();
    Ok((ids.len(), edges.into_iter().collect()))
}

fn shuffled_classes<R: Rng + ?Sized>(counts: &[usize], rng: &mut R) -> Vec<usize> {
    let mut classes: Vec<usize> = counts
        .iter()
        .enumerate()
        .flat_map(|(c, &k)| std::iter::repeat_n(c, k))
        .collect();
    classes.shuffle(rng);
    classes
}

/// Loads the configured edge list, or draws a random homophilous skeleton.
pub fn build_skeleton<R: Rng + ?Sized>(
    cfg: &SynthConfig,
    rng: &mut R,
) -> Result<Skeleton, SynthError> {
    match &cfg.skeleton {
        SkeletonSource::EdgeList { path } => {
            let (count, edges) = load_edge_list(path)?;
            if count != cfg.total() {
                return Err(SynthError::Config(format!(
                    "{} has {count} nodes but class_counts sum to {}",
                    path.display(),
                    cfg.total()
                )));
            }
            let classes = shuffled_classes(&cfg.class_counts, rng);
            Ok(Skeleton { edges, classes })
        }
        SkeletonSource::Random {
            nodes,
            mean_degree,
            homophily,
        } => {
            let classes = shuffled_classes(&cfg.class_counts, rng);
            let edges = random_skeleton(&classes, *nodes, *mean_degree, *homophily, rng);
            Ok(Skeleton { edges, classes })
        }
    }
}

fn random_skeleton<R: Rng + ?Sized>(
    classes: &[usize],
    nodes: usize,
    mean_degree: f64,
    homophily: f64,
    rng: &mut R,
) -> Vec<(usize, usize)> {
    let num_classes = classes.iter().max().map_or(0, |&c| c + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &c) in classes.iter().enumerate() {
        members[c].push(i);
    }
    let max_edges = nodes * nodes.saturating_sub(1) / 2;
    let target = ((nodes as f64 * mean_degree / 2.0).round() as usize).min(max_edges);
    let mut edges = BTreeSet::new();
    let mut attempts = 0usize;
    while edges.len() < target && attempts < 100 * target.max(1) {
        attempts += 1;
        let u = rng.random_range(0..nodes);
        let own = &members[classes[u]];
        let v = if rng.random::<f64>() < homophily {
            if own.len() < 2 {
                continue;
            }
            own[rng.random_range(0..own.len())]
        } else {
            let others = nodes - own.len();
            if others == 0 {
                continue;
            }
            // Uniform over nodes outside u's class.
            let mut k = rng.random_range(0..others);
            let mut pick = None;
            for (c, m) in members.iter().enumerate() {
                if c == classes[u] {
                    continue;
                }
                if k < m.len() {
                    pick = Some(m[k]);
                    break;
                }
                k -= m.len();
            }
            pick.expect("k indexes an out-of-class node")
        };
        if u != v {
            edges.insert((u.min(v), u.max(v)));
        }
    }
    edges.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::{stream_rng, DEFAULT_CLASS_COUNTS};
    use std::io::Write;

    #[test]
    fn fallback_skeleton_matches_class_counts_and_degree() {
        let cfg = SynthConfig::default();
        let s = build_skeleton(&cfg, &mut stream_rng(7, 0)).unwrap();
        assert_eq!(s.classes.len(), 2708);
        let mut hist = [0usize; 7];
        for &c in &s.classes {
            hist[c] += 1;
        }
        assert_eq!(hist, DEFAULT_CLASS_COUNTS);
        let mean_degree = 2.0 * s.edges.len() as f64 / 2708.0;
        assert!((mean_degree - 4.0).abs() < 0.01, "{mean_degree}");
        let same = s
            .edges
            .iter()
            .filter(|&&(u, v)| s.classes[u] == s.classes[v])
            .count() as f64
            / s.edges.len() as f64;
        assert!((same - 0.8).abs() < 0.03, "{same}");
    }

    #[test]
    fn edge_list_is_reindexed() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(
            f,
            "# citing cited\n35 1033\n35 103482\n\n1033 103482\n35 35"
        )
        .unwrap();
        let (count, edges) = load_edge_list(f.path()).unwrap();
        assert_eq!(count, 3);
        assert_eq!(edges, vec![(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn edge_list_node_count_must_match_classes() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "0 1\n1 2").unwrap();
        let cfg = SynthConfig {
            skeleton: SkeletonSource::EdgeList {
                path: f.path().to_path_buf(),
            },
            ..SynthConfig::default()
        };
        assert!(matches!(
            build_skeleton(&cfg, &mut stream_rng(0, 0)),
            Err(SynthError::Config(_))
        ));
    }

    #[test]
    fn malformed_edge_list_names_the_line() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "0 1\n1 x").unwrap();
        let err = load_edge_list(f.path()).unwrap_err();
        assert!(matches!(err, SynthError::EdgeList { line: 2, .. }), "{err}");
    }
}
