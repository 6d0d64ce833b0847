use serde::{Deserialize, Serialize};

use crate::numeric::Tensor;

/// A committed pseudo-label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub confidence: f64,
    pub id: usize,
    pub label: usize,
}

/// Picks up to `k` instances from `pool` whose IC and HC argmax agree, ranked
/// by `min(max ic_prob, max γ)` descending with ties broken by ascending id.
/// `ic_probs` and `gamma` are indexed by instance id.
pub fn cautious_select(
    ic_probs: &Tensor,
    gamma: &Tensor,
    pool: &[usize],
    k: usize,
) -> Vec<Selection> {
    let mut candidates: Vec<Selection> = pool
        .iter()
        .filter_map(|&id| {
            let a = ic_probs.argmax_row(id);
            let b = gamma.argmax_row(id);
            (a == b).then(|| Selection {
                confidence: ic_probs.get(id, a).min(gamma.get(id, b)),
                id,
                label: a,
            })
        })
        .collect();
    candidates.sort_by(|x, y| y.confidence.total_cmp(&x.confidence).then(x.id.cmp(&y.id)));
    candidates.dedup_by_key(|s| s.id);
    candidates.truncate(k);
    candidates
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(r: &[[f64; 2]]) -> Tensor {
        Tensor::from_rows(&r.iter().map(|x| x.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn picks_the_most_confident() {
        let ic = rows(&[[0.95, 0.05], [0.1, 0.9], [0.8, 0.2]]);
        let s = cautious_select(&ic, &ic, &[0, 1, 2], 2);
        assert_eq!(s.iter().map(|x| x.id).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(s[1].label, 1);
        assert_eq!(s[0].confidence, 0.95);
    }

    #[test]
    fn disagreement_excludes_candidate() {
        let ic = rows(&[[0.99, 0.01], [0.6, 0.4]]);
        let hc = rows(&[[0.2, 0.8], [0.7, 0.3]]);
        let s = cautious_select(&ic, &hc, &[0, 1], 2);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].id, 1);
        assert_eq!(s[0].confidence, 0.6);
    }

    #[test]
    fn ties_break_by_id_and_large_k_returns_pool() {
        let ic = rows(&[[0.7, 0.3], [0.7, 0.3], [0.7, 0.3]]);
        let s = cautious_select(&ic, &ic, &[2, 0, 1], 10);
        assert_eq!(s.iter().map(|x| x.id).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert!(cautious_select(&ic, &ic, &[0, 1], 0).is_empty());
        assert!(s.windows(2).all(|w| w[0].confidence >= w[1].confidence));
    }
}
