use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::numeric::Tensor;

/// Accuracy, Macro-F1 and the `c × c` confusion matrix (rows: truth, columns: prediction).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub confusion: Vec<Vec<usize>>,
}

/// Scores predictions against ground truth. Classes absent from both the
/// predictions and the truth contribute an F1 of zero.
pub fn score(
    predicted: &[usize],
    truth: &[usize],
    num_classes: usize,
) -> Result<Evaluation, TrainError> {
    if predicted.is_empty() {
        return Err(TrainError::EmptySplit);
    }
    if predicted.len() != truth.len() {
        return Err(TrainError::Config(format!(
            "{} predictions for {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    let mut confusion = vec![vec![0usize; num_classes]; num_classes];
    for (&p, &t) in predicted.iter().zip(truth) {
        if p >= num_classes || t >= num_classes {
            return Err(TrainError::Config(format!(
                "class index {} outside 0..{num_classes}",
                p.max(t)
            )));
        }
        confusion[t][p] += 1;
    }
    let correct: usize = (0..num_classes).map(|k| confusion[k][k]).sum();
    let f1_sum: f64 = (0..num_classes)
        .map(|k| {
            let tp = confusion[k][k] as f64;
            let predicted_k: usize = (0..num_classes).map(|t| confusion[t][k]).sum();
            let actual_k: usize = confusion[k].iter().sum();
            let denom = (predicted_k + actual_k) as f64;
            if denom == 0.0 {
                0.0
            } else {
                2.0 * tp / denom
            }
        })
        .sum();
    Ok(Evaluation {
        accuracy: correct as f64 / predicted.len() as f64,
        macro_f1: f1_sum / num_classes as f64,
        confusion,
    })
}

/// Row-wise argmax of a probability matrix.
pub fn argmax_rows(probs: &Tensor) -> Vec<usize> {
    (0..probs.rows()).map(|r| probs.argmax_row(r)).collect()
}

/// Average ranks (1-based), ties sharing the mean of their positions.
fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation; `NaN` when either side is constant or shorter than 2.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    if xs.len() != ys.len() || xs.len() < 2 {
        return f64::NAN;
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = xs.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    cov / (vx * vy).sqrt()
}

/// Fraction of wrong predictions among the `λ` most confident ones, for each
/// `λ` in `grid`. `confidence[i]` and `correct[i]` describe one held instance;
/// ties in confidence are ordered by position. `λ` beyond the pool size uses
/// the whole pool.
pub fn false_prediction_rates(confidence: &[f64], correct: &[bool], grid: &[usize]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..confidence.len()).collect();
    order.sort_by(|&a, &b| confidence[b].total_cmp(&confidence[a]).then(a.cmp(&b)));
    let mut wrong_prefix = Vec::with_capacity(order.len() + 1);
    wrong_prefix.push(0usize);
    for &i in &order {
        wrong_prefix.push(wrong_prefix.last().copied().unwrap_or(0) + usize::from(!correct[i]));
    }
    grid.iter()
        .map(|&lambda| {
            let k = lambda.min(order.len());
            if k == 0 {
                0.0
            } else {
                wrong_prefix[k] as f64 / k as f64
            }
        })
        .collect()
}
