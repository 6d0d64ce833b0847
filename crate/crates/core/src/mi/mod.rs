//! Jensen-Shannon mutual-information estimators, negative sampling and the
//! exact discrete oracle.

mod oracle;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::numeric::{softplus, NumericError, Tape, Tensor, Var};

pub use oracle::{
    exact_cond_mi, exact_mi, interaction_info, random_joint, random_markov_chain, verify_theorems,
    CheckRow, JointDistribution3, SizeSpec, VarSet, VerifyReport, VERIFY_HEADER,
};

#[derive(Debug, Error)]
pub enum MiError {
    #[error("{0} needs at least one positive and one negative score")]
    EmptyScores(&'static str),
    #[error("instance MI needs at least 2 instances, got {0}")]
    TooFewInstances(usize),
    #[error("instance {0} has no nodes")]
    EmptyInstance(usize),
    #[error("hierarchy MI needs at least one instance")]
    NoInstances,
    #[error("invalid joint distribution: {0}")]
    Distribution(String),
    #[error("invalid alphabet sizes {0:?}: expected e.g. `2-5` or `3x4x3`")]
    Sizes(String),
    #[error(transparent)]
    Numeric(#[from] NumericError),
}

/// `mean(−sp(−D⁺)) − mean(sp(D⁻))` over raw (pre-sigmoid) scores.
pub fn jsd_pair(score_pos: &[f64], score_neg: &[f64]) -> Result<f64, MiError> {
    if score_pos.is_empty() || score_neg.is_empty() {
        return Err(MiError::EmptyScores("jsd_pair"));
    }
    let pos = score_pos.iter().map(|&d| -softplus(-d)).sum::<f64>() / score_pos.len() as f64;
    let neg = score_neg.iter().map(|&d| softplus(d)).sum::<f64>() / score_neg.len() as f64;
    Ok(pos - neg)
}

/// `α (I_inst + I_hier)`.
pub fn hgmi(instance_mi_value: f64, hier_mi_value: f64, alpha: f64) -> f64 {
    alpha * (instance_mi_value + hier_mi_value)
}

/// Negative node representations paired with instance `i`'s embedding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NegativeSample {
    /// Instance the negative nodes come from; never the anchor itself.
    pub source: usize,
    pub nodes: Vec<usize>,
}

/// Sampling plan for one instance-MI evaluation. Positives are implicit: every
/// node of instance `i` paired with `e_i`. `negatives[i]` holds the negatives
/// for anchor `i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MiBatch {
    pub negatives: Vec<NegativeSample>,
}

impl MiBatch {
    /// For each anchor, one other instance drawn uniformly and `ratio · n_i`
    /// of its nodes drawn uniformly with replacement.
    pub fn sample<R: Rng + ?Sized>(
        sizes: &[usize],
        ratio: usize,
        rng: &mut R,
    ) -> Result<Self, MiError> {
        let count = sizes.len();
        if count < 2 {
            return Err(MiError::TooFewInstances(count));
        }
        if let Some(i) = sizes.iter().position(|&n| n == 0) {
            return Err(MiError::EmptyInstance(i));
        }
        let ratio = ratio.max(1);
        let negatives = (0..count)
            .map(|i| {
                let mut source = rng.random_range(0..count - 1);
                if source >= i {
                    source += 1;
                }
                let nodes = (0..ratio * sizes[i])
                    .map(|_| rng.random_range(0..sizes[source]))
                    .collect();
                NegativeSample { source, nodes }
            })
            .collect();
        Ok(Self { negatives })
    }
}

/// Row offsets of each instance inside the row-concatenation of all `H_i`.
pub fn row_offsets(sizes: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(sizes.len() + 1);
    out.push(0);
    for &n in sizes {
        out.push(out.last().copied().unwrap_or(0) + n);
    }
    out
}

/// `Σ_r w_r · softplus(sign · x_r)` for a column vector `x`.
fn weighted_softplus(
    tape: &mut Tape,
    x: Var,
    sign: f64,
    weights: Vec<f64>,
) -> Result<Var, NumericError> {
    let x = if sign < 0.0 { tape.scale(x, -1.0) } else { x };
    let sp = tape.softplus(x);
    let w = tape.constant(Tensor::row_vector(weights));
    tape.matmul(w, sp)
}

/// Row-wise dot products of two equally shaped matrices, as a column.
fn row_dots(tape: &mut Tape, a: Var, b: Var) -> Result<Var, NumericError> {
    let prod = tape.mul(a, b)?;
    let ones = tape.constant(Tensor::filled(tape.shape(prod).1, 1, 1.0));
    tape.matmul(prod, ones)
}

/// Instance-level estimate on the tape.
///
/// `hcat` is the row-concatenation of every `H_i` (`Σ n_i × v`) with
/// `offsets = row_offsets(sizes)`; `e` is `N × m` and `w_di` is `v × m`.
/// Each instance contributes `(1/N)` times its per-instance JSD, whose terms
/// are means over its `n_i` positives and its negatives.
pub fn instance_mi_tape(
    tape: &mut Tape,
    hcat: Var,
    offsets: &[usize],
    e: Var,
    w_di: Var,
    batch: &MiBatch,
) -> Result<Var, MiError> {
    let count = offsets.len().saturating_sub(1);
    if count < 2 {
        return Err(MiError::TooFewInstances(count));
    }
    if batch.negatives.len() != count {
        return Err(NumericError::InvalidArgument {
            op: "instance_mi",
            reason: format!(
                "{} negative sets for {count} instances",
                batch.negatives.len()
            ),
        }
        .into());
    }
    let inv_n = 1.0 / count as f64;
    let wt = tape.transpose(w_di);
    let u = tape.matmul(e, wt)?;

    let mut pos_owner = Vec::with_capacity(offsets[count]);
    let mut pos_w = Vec::with_capacity(offsets[count]);
    let mut neg_rows = Vec::new();
    let mut neg_owner = Vec::new();
    let mut neg_w = Vec::new();
    for i in 0..count {
        let n = offsets[i + 1] - offsets[i];
        if n == 0 {
            return Err(MiError::EmptyInstance(i));
        }
        pos_owner.extend(std::iter::repeat_n(i, n));
        pos_w.extend(std::iter::repeat_n(inv_n / n as f64, n));
        let neg = &batch.negatives[i];
        if neg.nodes.is_empty() {
            return Err(MiError::EmptyScores("instance_mi"));
        }
        let base = offsets[neg.source];
        let bound = offsets[neg.source + 1] - base;
        for &j in &neg.nodes {
            if j >= bound {
                return Err(NumericError::Index {
                    op: "instance_mi",
                    index: j,
                    bound,
                }
                .into());
            }
            neg_rows.push(base + j);
        }
        neg_owner.extend(std::iter::repeat_n(i, neg.nodes.len()));
        neg_w.extend(std::iter::repeat_n(
            inv_n / neg.nodes.len() as f64,
            neg.nodes.len(),
        ));
    }

    let u_pos = tape.gather_rows(u, &pos_owner)?;
    let pos = row_dots(tape, hcat, u_pos)?;
    let pos_term = weighted_softplus(tape, pos, -1.0, pos_w)?;

    let h_neg = tape.gather_rows(hcat, &neg_rows)?;
    let u_neg = tape.gather_rows(u, &neg_owner)?;
    let neg = row_dots(tape, h_neg, u_neg)?;
    let neg_term = weighted_softplus(tape, neg, 1.0, neg_w)?;

    let total = tape.add(pos_term, neg_term)?;
    Ok(tape.scale(total, -1.0))
}

/// Instance-level estimate on plain tensors.
pub fn instance_mi(
    h_all: &[Tensor],
    e: &Tensor,
    w_di: &Tensor,
    batch: &MiBatch,
) -> Result<f64, MiError> {
    if h_all.len() < 2 {
        return Err(MiError::TooFewInstances(h_all.len()));
    }
    let sizes: Vec<usize> = h_all.iter().map(Tensor::rows).collect();
    let mut tape = Tape::new();
    let parts: Vec<Var> = h_all.iter().map(|h| tape.constant(h.clone())).collect();
    let hcat = tape.concat_rows(&parts)?;
    let ev = tape.constant(e.clone());
    let wv = tape.constant(w_di.clone());
    let out = instance_mi_tape(&mut tape, hcat, &row_offsets(&sizes), ev, wv, batch)?;
    Ok(tape.value(out).item()?)
}

/// Uniform row permutation used for hierarchy-level negatives.
pub fn shuffle_permutation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    perm
}

/// Hierarchy-level estimate on the tape: the mean over all `(j, i)` of
/// `−sp(−e_j W γ_i)` minus the mean of `sp(ê_j W γ_i)` with `ê = E[perm]`.
pub fn hier_mi_tape(
    tape: &mut Tape,
    e: Var,
    gamma: Var,
    w_dh: Var,
    perm: &[usize],
) -> Result<Var, MiError> {
    if tape.shape(e).0 == 0 {
        return Err(MiError::NoInstances);
    }
    let ew = tape.matmul(e, w_dh)?;
    let pos = tape.mean_softplus_gram(ew, gamma, -1.0)?;
    let e_neg = tape.gather_rows(e, perm)?;
    let ew_neg = tape.matmul(e_neg, w_dh)?;
    let neg = tape.mean_softplus_gram(ew_neg, gamma, 1.0)?;
    let total = tape.add(pos, neg)?;
    Ok(tape.scale(total, -1.0))
}

/// [`hier_mi_tape`] for any full-length `perm`: the shuffled negatives range
/// over the same `(j, i)` pairs as the positives, so both sums are taken in a
/// single pass and the permutation drops out.
pub fn hier_mi_fused_tape(tape: &mut Tape, e: Var, gamma: Var, w_dh: Var) -> Result<Var, MiError> {
    if tape.shape(e).0 == 0 {
        return Err(MiError::NoInstances);
    }
    let ew = tape.matmul(e, w_dh)?;
    let both = tape.mean_softplus_gram_both(ew, gamma)?;
    Ok(tape.scale(both, -1.0))
}

/// Hierarchy-level estimate on plain tensors with a freshly drawn shuffle.
pub fn hier_mi<R: Rng + ?Sized>(
    e: &Tensor,
    gamma: &Tensor,
    w_dh: &Tensor,
    rng: &mut R,
) -> Result<f64, MiError> {
    if e.rows() == 0 {
        return Err(MiError::NoInstances);
    }
    let perm = shuffle_permutation(e.rows(), rng);
    let mut tape = Tape::new();
    let ev = tape.constant(e.clone());
    let gv = tape.constant(gamma.clone());
    let wv = tape.constant(w_dh.clone());
    let out = hier_mi_tape(&mut tape, ev, gv, wv, &perm)?;
    Ok(tape.value(out).item()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::{hier_score, instance_score};
    use crate::numeric::grad_check;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::LN_2;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
        let data = (0..rows * cols)
            .map(|_| rng.random_range(-1.5..1.5))
            .collect();
        Tensor::new(rows, cols, data).unwrap()
    }

    #[test]
    fn jsd_of_zero_scores() {
        let v = jsd_pair(&[0.0; 3], &[0.0; 5]).unwrap();
        assert!((v + 2.0 * LN_2).abs() < 1e-15);
        assert!(jsd_pair(&[], &[0.0]).is_err());
        assert!(jsd_pair(&[0.0], &[]).is_err());
    }

    #[test]
    fn jsd_limits_approach_zero_from_below() {
        let v = jsd_pair(&[40.0], &[-40.0]).unwrap();
        assert!(v < 0.0 && v > -1e-15);
    }

    #[test]
    fn jsd_matches_direct_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pos: Vec<f64> = (0..7).map(|_| rng.random_range(-5.0..5.0)).collect();
        let neg: Vec<f64> = (0..4).map(|_| rng.random_range(-5.0..5.0)).collect();
        let direct = pos.iter().map(|d| -(1.0 + (-d).exp()).ln()).sum::<f64>() / 7.0
            - neg.iter().map(|d| (1.0 + d.exp()).ln()).sum::<f64>() / 4.0;
        assert!((jsd_pair(&pos, &neg).unwrap() - direct).abs() < 1e-13);
    }

    #[test]
    fn jsd_is_monotone() {
        let base = jsd_pair(&[0.3, -0.2], &[0.1]).unwrap();
        assert!(jsd_pair(&[0.4, -0.2], &[0.1]).unwrap() > base);
        assert!(jsd_pair(&[0.3, -0.2], &[0.2]).unwrap() < base);
    }

    #[test]
    fn hgmi_is_weighted_sum() {
        assert_eq!(hgmi(1.0, 2.0, 0.0), 0.0);
        let m = -2.0 * LN_2;
        assert!((hgmi(m, m, 0.5) - m).abs() < 1e-15);
        assert_eq!(hgmi(2.0, 4.0, 0.5), 3.0);
    }

    #[test]
    fn sampling_never_pairs_an_instance_with_itself() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sizes = [3, 1, 4, 2];
        for _ in 0..50 {
            let b = MiBatch::sample(&sizes, 2, &mut rng).unwrap();
            for (i, neg) in b.negatives.iter().enumerate() {
                assert_ne!(neg.source, i);
                assert_eq!(neg.nodes.len(), 2 * sizes[i]);
                assert!(neg.nodes.iter().all(|&j| j < sizes[neg.source]));
            }
        }
        assert!(matches!(
            MiBatch::sample(&[3], 1, &mut rng),
            Err(MiError::TooFewInstances(1))
        ));
    }

    #[test]
    fn identical_instances_with_zero_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = random(4, 2, &mut rng);
        let e = random(2, 6, &mut rng);
        let batch = MiBatch::sample(&[4, 4], 1, &mut rng).unwrap();
        let v = instance_mi(&[h.clone(), h], &e, &Tensor::zeros(2, 6), &batch).unwrap();
        assert!((v + 2.0 * LN_2).abs() < 1e-14);
        assert!(instance_mi(&[random(2, 2, &mut rng)], &e, &Tensor::zeros(2, 6), &batch).is_err());
    }

    /// Loop oracle: per-instance jsd_pair over explicit bilinear scores,
    /// weighted by 1/N.
    #[test]
    fn instance_mi_matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sizes = [3, 5, 1, 4];
        let h: Vec<Tensor> = sizes.iter().map(|&n| random(n, 2, &mut rng)).collect();
        let e = random(4, 3, &mut rng);
        let w = random(2, 3, &mut rng);
        let batch = MiBatch::sample(&sizes, 1, &mut rng).unwrap();
        let mut want = 0.0;
        for i in 0..4 {
            let pos: Vec<f64> = (0..sizes[i])
                .map(|j| instance_score(h[i].row(j), e.row(i), &w).unwrap())
                .collect();
            let neg_src = &batch.negatives[i];
            let neg: Vec<f64> = neg_src
                .nodes
                .iter()
                .map(|&j| instance_score(h[neg_src.source].row(j), e.row(i), &w).unwrap())
                .collect();
            want += jsd_pair(&pos, &neg).unwrap() / 4.0;
        }
        let got = instance_mi(&h, &e, &w, &batch).unwrap();
        assert!((got - want).abs() < 1e-13, "{got} vs {want}");
    }

    #[test]
    fn hier_mi_zero_weights_and_single_instance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let e = random(5, 3, &mut rng);
        let g = random(5, 2, &mut rng);
        let v = hier_mi(&e, &g, &Tensor::zeros(3, 2), &mut rng).unwrap();
        assert!((v + 2.0 * LN_2).abs() < 1e-14);

        let e1 = random(1, 3, &mut rng);
        let g1 = random(1, 2, &mut rng);
        let w = random(3, 2, &mut rng);
        let d = hier_score(e1.row(0), g1.row(0), &w).unwrap();
        let v = hier_mi(&e1, &g1, &w, &mut rng).unwrap();
        assert!((v - (-softplus(-d) - softplus(d))).abs() < 1e-14);
        assert!(matches!(
            hier_mi(&Tensor::zeros(0, 3), &Tensor::zeros(0, 2), &w, &mut rng),
            Err(MiError::NoInstances)
        ));
    }

    #[test]
    fn hier_mi_matches_quadratic_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 6;
        let e = random(n, 3, &mut rng);
        let g = random(n, 2, &mut rng);
        let w = random(3, 2, &mut rng);
        let perm = shuffle_permutation(n, &mut ChaCha8Rng::seed_from_u64(99));
        let mut want = 0.0;
        for i in 0..n {
            let pos: Vec<f64> = (0..n)
                .map(|j| hier_score(e.row(j), g.row(i), &w).unwrap())
                .collect();
            let neg: Vec<f64> = (0..n)
                .map(|j| hier_score(e.row(perm[j]), g.row(i), &w).unwrap())
                .collect();
            want += jsd_pair(&pos, &neg).unwrap() / n as f64;
        }
        let got = hier_mi(&e, &g, &w, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
        assert!((got - want).abs() < 1e-13);
    }

    #[test]
    fn estimator_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let sizes = [3, 2, 4];
        let offsets = row_offsets(&sizes);
        let batch = MiBatch::sample(&sizes, 1, &mut rng).unwrap();
        let perm = shuffle_permutation(3, &mut rng);
        let params = vec![
            random(9, 2, &mut rng),
            random(3, 4, &mut rng),
            random(2, 4, &mut rng),
            random(3, 3, &mut rng),
            random(4, 3, &mut rng),
        ];
        let report = grad_check(
            |ps| {
                let mut tape = Tape::new();
                let v: Vec<Var> = ps.iter().map(|t| tape.param(t.clone())).collect();
                let gamma = tape.softmax_rows(v[3]);
                let a = instance_mi_tape(&mut tape, v[0], &offsets, v[1], v[2], &batch).unwrap();
                let b = hier_mi_tape(&mut tape, v[1], gamma, v[4], &perm).unwrap();
                let loss = tape.add(a, b)?;
                let grads = tape.backward(loss)?;
                let gs = v
                    .iter()
                    .zip(ps)
                    .map(|(&x, t)| grads.get_or_zeros(x, t.shape()))
                    .collect();
                Ok((tape.value(loss).item()?, gs))
            },
            &params,
            1e-5,
            1e-4,
        )
        .unwrap();
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn fused_hierarchy_estimate_ignores_the_shuffle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (n, m, c) = (6, 4, 3);
        let e = random(n, m, &mut rng);
        let gamma = random(n, c, &mut rng);
        let w = random(m, c, &mut rng);
        let run = |perm: Option<&[usize]>| {
            let mut tape = Tape::new();
            let (ev, gv, wv) = (
                tape.param(e.clone()),
                tape.param(gamma.clone()),
                tape.param(w.clone()),
            );
            let out = match perm {
                Some(p) => hier_mi_tape(&mut tape, ev, gv, wv, p).unwrap(),
                None => hier_mi_fused_tape(&mut tape, ev, gv, wv).unwrap(),
            };
            let g = tape.backward(out).unwrap();
            let grads: Vec<Tensor> = [ev, gv, wv]
                .iter()
                .map(|&v| g.get(v).unwrap().clone())
                .collect();
            (tape.value(out).item().unwrap(), grads)
        };
        let (fused, fused_grads) = run(None);
        for _ in 0..5 {
            let perm = shuffle_permutation(n, &mut rng);
            let (literal, literal_grads) = run(Some(&perm));
            assert!((fused - literal).abs() < 1e-13);
            for (a, b) in fused_grads.iter().zip(&literal_grads) {
                assert!(a.max_abs_diff(b) < 1e-13);
            }
        }
    }
}
