use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::metrics::{argmax_rows, false_prediction_rates, score, Evaluation};
use super::objective::{
    objective, predict, supervised_risk, ObjectiveSettings, Predictions, Targets, Workspace,
};
use super::report::{IterationRecord, TrainReport};
use super::select::{cautious_select, Selection};
use super::{Mode, ModelState, TrainConfig, TrainError};
use crate::graph::HierarchicalGraph;
use crate::nets::Model;
use crate::numeric::AdamState;
use crate::par::Exec;

const INIT_STREAM: u64 = 0;

fn train_stream(iteration: usize) -> u64 {
    1 + 2 * iteration as u64
}

fn eval_stream(iteration: usize) -> u64 {
    2 + 2 * iteration as u64
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn fresh_state(h: &HierarchicalGraph, cfg: &TrainConfig) -> (Model, AdamState) {
    let arch = cfg
        .model
        .architecture(h.feature_dim(), h.num_classes, cfg.mode);
    let model = Model::init(arch, &mut rng_for(cfg.seed, INIT_STREAM));
    let adam = AdamState::new(cfg.lr, model.tensors());
    (model, adam)
}

fn labeled_targets(h: &HierarchicalGraph, ids: &[usize]) -> Result<Targets, TrainError> {
    let pairs = ids
        .iter()
        .map(|&i| {
            h.label(i)
                .map(|y| (i, y))
                .ok_or(TrainError::MissingLabel(i))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Targets::new(pairs))
}

/// Full-batch Adam on `targets` with early stopping on the risk.
#[allow(clippy::too_many_arguments)]
fn optimize(
    model: &mut Model,
    adam: &mut AdamState,
    ws: &Workspace,
    targets: &Targets,
    cfg: &TrainConfig,
    epochs: usize,
    settings: &ObjectiveSettings,
    rng: &mut ChaCha8Rng,
    exec: Exec,
) -> Result<Vec<f64>, TrainError> {
    let mut losses = Vec::with_capacity(epochs);
    let mut best = f64::INFINITY;
    let mut stale = 0;
    for _ in 0..epochs {
        let v = objective(model, ws, targets, settings, true, true, rng, exec)?;
        let grads = v.grads.expect("gradients requested");
        adam.step(&mut model.tensors_mut(), &grads)?;
        losses.push(v.loss);
        if v.zeta < best - cfg.min_improvement {
            best = v.zeta;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    Ok(losses)
}

fn split_metrics(
    h: &HierarchicalGraph,
    preds: &Predictions,
    split: &[usize],
) -> Result<Evaluation, TrainError> {
    let truth = split
        .iter()
        .map(|&i| h.label(i).ok_or(TrainError::MissingLabel(i)))
        .collect::<Result<Vec<_>, _>>()?;
    let all = argmax_rows(preds.final_probs());
    let predicted: Vec<usize> = split.iter().map(|&i| all[i]).collect();
    score(&predicted, &truth, h.num_classes)
}

fn check_inputs(h: &HierarchicalGraph, cfg: &TrainConfig) -> Result<(), TrainError> {
    cfg.check()?;
    if h.splits.labeled.is_empty() {
        return Err(TrainError::NoLabels);
    }
    if h.len() < 2 {
        return Err(TrainError::TooFewInstances(h.len()));
    }
    Ok(())
}

/// Joint training on the original labels only (one iteration, no pseudo-labels).
pub fn train_seal(
    h: &HierarchicalGraph,
    cfg: &TrainConfig,
    exec: Exec,
) -> Result<(ModelState, TrainReport), TrainError> {
    let mut cfg = cfg.clone();
    cfg.max_iterations = 0;
    run(h, &cfg, exec)
}

/// Cautious iteration: iteration `t` trains on the original labels plus the
/// pseudo-labels selected after iteration `t − 1`, where iteration `t` selects
/// the `t · λ` most confident agreeing instances from the original unlabeled
/// pool. Runs for `t = 0 ..= min(max_iterations, ⌊U / λ⌋)`.
pub fn train_seal_ci(
    h: &HierarchicalGraph,
    cfg: &TrainConfig,
    exec: Exec,
) -> Result<(ModelState, TrainReport), TrainError> {
    run(h, cfg, exec)
}

/// Dispatches on `cfg.mode`; only `seal-ci` runs more than one iteration.
pub fn train(
    h: &HierarchicalGraph,
    cfg: &TrainConfig,
    exec: Exec,
) -> Result<(ModelState, TrainReport), TrainError> {
    match cfg.mode {
        Mode::SealCi => train_seal_ci(h, cfg, exec),
        _ => train_seal(h, cfg, exec),
    }
}

fn run(
    h: &HierarchicalGraph,
    cfg: &TrainConfig,
    exec: Exec,
) -> Result<(ModelState, TrainReport), TrainError> {
    check_inputs(h, cfg)?;
    let ws = Workspace::new(h, exec)?;
    let settings = ObjectiveSettings {
        mode: cfg.mode,
        alpha: cfg.alpha_weight,
        beta: cfg.mi_coefficient,
        negative_ratio: cfg.negative_ratio,
    };
    let original = labeled_targets(h, &h.splits.labeled)?;
    let pool = &h.splits.unlabeled;
    let last = if cfg.mode == Mode::SealCi {
        cfg.max_iterations.min(pool.len() / cfg.lambda)
    } else {
        0
    };

    let (mut model, mut adam) = fresh_state(h, cfg);
    let mut pseudo: Vec<Selection> = Vec::new();
    let mut records = Vec::with_capacity(last + 1);
    for t in 0..=last {
        if t > 0 && !cfg.warm_start {
            (model, adam) = fresh_state(h, cfg);
        }
        let mut targets = original.clone();
        targets.ids.extend(pseudo.iter().map(|s| s.id));
        targets.labels.extend(pseudo.iter().map(|s| s.label));

        let epochs = match cfg.refine_epochs {
            Some(e) if t > 0 && cfg.warm_start => e,
            _ => cfg.epochs_per_iteration,
        };
        let mut rng = rng_for(cfg.seed, train_stream(t));
        let epoch_losses = optimize(
            &mut model, &mut adam, &ws, &targets, cfg, epochs, &settings, &mut rng, exec,
        )?;

        let preds = predict(&model, &ws, cfg.mode, exec)?;
        let (ic, gamma) = (preds.ic_probs.as_ref(), preds.gamma.as_ref());
        let zeta_orig = supervised_risk(ic, gamma, &original)?;
        let zeta_enlarged = supervised_risk(ic, gamma, &targets)?;
        let mut eval_rng = rng_for(cfg.seed, eval_stream(t));
        let value = objective(
            &model,
            &ws,
            &targets,
            &settings,
            false,
            false,
            &mut eval_rng,
            exec,
        )?;
        let test = if h.splits.test.is_empty() {
            None
        } else {
            Some(split_metrics(h, &preds, &h.splits.test)?)
        };

        let selected = if t < last {
            let k = t * cfg.lambda;
            match (cfg.freeze_pseudo_labels, ic, gamma) {
                (_, None, _) | (_, _, None) => Vec::new(),
                (false, Some(ic), Some(g)) => cautious_select(ic, g, pool, k),
                (true, Some(ic), Some(g)) => {
                    let rest: Vec<usize> = pool
                        .iter()
                        .copied()
                        .filter(|i| !pseudo.iter().any(|s| s.id == *i))
                        .collect();
                    let mut kept = pseudo.clone();
                    kept.extend(cautious_select(
                        ic,
                        g,
                        &rest,
                        k.saturating_sub(pseudo.len()),
                    ));
                    kept
                }
            }
        } else {
            Vec::new()
        };

        records.push(IterationRecord {
            iteration: t,
            zeta_orig,
            zeta_enlarged,
            mi_inst: value.mi_inst,
            mi_hier: value.mi_hier,
            loss: value.loss,
            acc: test.as_ref().map_or(f64::NAN, |e| e.accuracy),
            macro_f1: test.as_ref().map_or(f64::NAN, |e| e.macro_f1),
            n_pseudo: pseudo.len(),
            epoch_losses,
            selected: selected.clone(),
        });
        pseudo = selected;
    }
    Ok((
        ModelState {
            mode: cfg.mode,
            model,
            adam: Some(adam),
        },
        TrainReport {
            mode: cfg.mode,
            records,
        },
    ))
}

fn check_compatible(state: &ModelState, h: &HierarchicalGraph) -> Result<(), TrainError> {
    let arch = &state.model.arch;
    if arch.num_classes != h.num_classes {
        return Err(TrainError::ClassMismatch {
            model: arch.num_classes,
            data: h.num_classes,
        });
    }
    if arch.in_dim != h.feature_dim() {
        return Err(TrainError::FeatureMismatch {
            model: arch.in_dim,
            data: h.feature_dim(),
        });
    }
    Ok(())
}

/// Accuracy, Macro-F1 and confusion matrix of the final classifier on `split`.
pub fn evaluate(
    state: &ModelState,
    h: &HierarchicalGraph,
    split: &[usize],
    exec: Exec,
) -> Result<Evaluation, TrainError> {
    check_compatible(state, h)?;
    if split.is_empty() {
        return Err(TrainError::EmptySplit);
    }
    let ws = Workspace::new(h, exec)?;
    let preds = predict(&state.model, &ws, state.mode, exec)?;
    split_metrics(h, &preds, split)
}

/// False-prediction rate of the instance classifier among its `λ` most
/// confident predictions on held-out instances with known labels
/// (unlabeled and test splits), averaged over `states`.
pub fn false_prediction_curve(
    states: &[ModelState],
    h: &HierarchicalGraph,
    grid: &[usize],
    exec: Exec,
) -> Result<Vec<(usize, f64)>, TrainError> {
    let held: Vec<usize> = h
        .splits
        .unlabeled
        .iter()
        .chain(&h.splits.test)
        .copied()
        .filter(|&i| h.label(i).is_some())
        .collect();
    if held.is_empty() {
        return Err(TrainError::EmptySplit);
    }
    let ws = Workspace::new(h, exec)?;
    let mut sums = vec![0.0; grid.len()];
    for state in states {
        check_compatible(state, h)?;
        let preds = predict(&state.model, &ws, state.mode, exec)?;
        let ic = preds
            .ic_probs
            .as_ref()
            .ok_or(TrainError::NeedsInstanceClassifier(
                "the false-prediction curve",
            ))?;
        let confidence: Vec<f64> = held.iter().map(|&i| ic.get(i, ic.argmax_row(i))).collect();
        let correct: Vec<bool> = held
            .iter()
            .map(|&i| Some(ic.argmax_row(i)) == h.label(i))
            .collect();
        for (s, r) in sums
            .iter_mut()
            .zip(false_prediction_rates(&confidence, &correct, grid))
        {
            *s += r;
        }
    }
    let n = states.len().max(1) as f64;
    Ok(grid.iter().zip(sums).map(|(&l, s)| (l, s / n)).collect())
}
