//! Loss evaluation and gradients.
//!
//! Instances are encoded independently (in parallel) with cached
//! intermediates. Their embeddings and node representations enter one outer
//! tape as leaves, where the head, HC, cross-entropy and MI terms are built.
//! The outer gradients are then pushed back through each instance's cache.
//! Per-instance gradients are summed in instance order, so results do not
//! depend on the thread count.

use std::sync::Arc;

use rand::{Rng, SeedableRng};

use super::{Mode, TrainError};
use crate::graph::{normalized_operator, HierarchicalGraph};
use crate::mi::{hier_mi_fused_tape, instance_mi_tape, row_offsets, MiBatch};
use crate::nets::{
    hc_tape, head_tape, EncoderCache, EncoderGrads, HeadVars, Model, PreparedInstance,
};
use crate::numeric::{SparseMatrix, Tape, Tensor, Var, LOG_CLAMP};
use crate::par::Exec;

/// Constant per-dataset operators.
#[derive(Clone, Debug)]
pub struct Workspace {
    pub instances: Vec<PreparedInstance>,
    pub sizes: Vec<usize>,
    pub offsets: Vec<usize>,
    pub hier_adj: Arc<SparseMatrix>,
    /// `[mean, max]` of each instance's feature rows, the HC input without IC.
    pub raw_pooled: Tensor,
    pub num_classes: usize,
}

impl Workspace {
    pub fn new(h: &HierarchicalGraph, exec: Exec) -> Result<Self, TrainError> {
        let instances = exec
            .map(&h.instances, PreparedInstance::new)
            .into_iter()
            .collect::<Result<Vec<_>, _>>()?;
        let sizes: Vec<usize> = instances.iter().map(PreparedInstance::n).collect();
        let d = h.feature_dim();
        let mut raw = Tensor::zeros(h.len(), 2 * d);
        for (i, g) in h.instances.iter().enumerate() {
            let row = raw.row_mut(i);
            for c in 0..d {
                let col = (0..g.n).map(|r| g.features.get(r, c));
                row[c] = col.clone().sum::<f64>() / g.n.max(1) as f64;
                row[d + c] = col.fold(f64::NEG_INFINITY, f64::max);
            }
        }
        Ok(Self {
            offsets: row_offsets(&sizes),
            sizes,
            instances,
            hier_adj: Arc::new(normalized_operator(h.len(), &h.hier_edges)),
            raw_pooled: raw,
            num_classes: h.num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }
}

/// Instances with (true or pseudo) labels that the supervised risk averages over.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Targets {
    pub ids: Vec<usize>,
    pub labels: Vec<usize>,
}

impl Targets {
    pub fn new(pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let (ids, labels) = pairs.into_iter().unzip();
        Self { ids, labels }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn one_hot(&self, c: usize) -> Tensor {
        let mut t = Tensor::zeros(self.len(), c);
        for (r, &y) in self.labels.iter().enumerate() {
            t.set(r, y, 1.0);
        }
        t
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectiveSettings {
    pub mode: Mode,
    pub alpha: f64,
    pub beta: f64,
    pub negative_ratio: usize,
}

/// Loss components and (optionally) gradients in [`Model::tensors`] order.
#[derive(Clone, Debug)]
pub struct ObjectiveValue {
    pub loss: f64,
    pub zeta: f64,
    pub mi_inst: f64,
    pub mi_hier: f64,
    pub grads: Option<Vec<Tensor>>,
}

fn rows_slice(t: &Tensor, start: usize, end: usize) -> Tensor {
    let c = t.cols();
    Tensor::new(end - start, c, t.data()[start * c..end * c].to_vec())
        .expect("row range inside tensor")
}

fn stack_rows(rows: &[&Tensor], cols: usize) -> Tensor {
    let n: usize = rows.iter().map(|t| t.rows()).sum();
    let mut data = Vec::with_capacity(n * cols);
    for t in rows {
        data.extend_from_slice(t.data());
    }
    Tensor::new(n, cols, data).expect("uniform column count")
}

fn check_targets(ws: &Workspace, targets: &Targets) -> Result<(), TrainError> {
    if targets.is_empty() {
        return Err(TrainError::NoLabels);
    }
    if let Some(&bad) = targets.ids.iter().find(|&&i| i >= ws.len()) {
        return Err(TrainError::Config(format!(
            "target instance {bad} out of range"
        )));
    }
    if let Some(&bad) = targets.labels.iter().find(|&&y| y >= ws.num_classes) {
        return Err(TrainError::Config(format!(
            "label {bad} outside 0..{}",
            ws.num_classes
        )));
    }
    Ok(())
}

/// Evaluates `ζ − β α (I_inst + I_hier)` (or the single-classifier risk for
/// the ablation modes) and, when `with_grads`, its gradient.
///
/// `training` enables head dropout. The rng drives dropout, then negative
/// sampling. The hierarchy term is evaluated in its shuffle-free form.
#[allow(clippy::too_many_arguments)]
pub fn objective<R: Rng + ?Sized>(
    model: &Model,
    ws: &Workspace,
    targets: &Targets,
    settings: &ObjectiveSettings,
    training: bool,
    with_grads: bool,
    rng: &mut R,
    exec: Exec,
) -> Result<ObjectiveValue, TrainError> {
    check_targets(ws, targets)?;
    let mode = settings.mode;
    let uses_mi = matches!(mode, Mode::Seal | Mode::SealCi);
    if uses_mi && ws.len() < 2 {
        return Err(TrainError::TooFewInstances(ws.len()));
    }
    let penalty_coef = model.arch.attention_penalty;
    let m = model.arch.embedding_dim();

    // Instances that go through IC: all of them, or only the targets for IC-only.
    let encoded: Vec<usize> = match mode {
        Mode::IcOnly => targets.ids.clone(),
        Mode::HcOnly => Vec::new(),
        Mode::Seal | Mode::SealCi => (0..ws.len()).collect(),
    };
    let local: Vec<EncoderCache> = exec
        .map(&encoded, |&i| {
            EncoderCache::forward(&ws.instances[i], &model.ic)
        })
        .into_iter()
        .collect::<Result<_, _>>()?;
    let penalty_weight = if encoded.is_empty() {
        0.0
    } else {
        penalty_coef / encoded.len() as f64
    };
    let penalty_value = if penalty_coef == 0.0 {
        0.0
    } else {
        penalty_weight * local.iter().map(EncoderCache::penalty).sum::<f64>()
    };

    let mut tape = Tape::with_exec(exec);
    let e_all = tape.param(stack_rows(
        &local.iter().map(|l| &l.e).collect::<Vec<_>>(),
        m,
    ));
    let head = HeadVars::params(&mut tape, &model.ic);
    let v0 = tape.param(model.hc.v0.clone());
    let v1 = tape.param(model.hc.v1.clone());
    let w_di = tape.param(model.disc.w_di.clone());
    let w_dh = tape.param(model.disc.w_dh.clone());
    let one_hot = targets.one_hot(ws.num_classes);

    let ce_ic = if mode == Mode::HcOnly {
        None
    } else {
        let e_lab = if mode == Mode::IcOnly {
            e_all
        } else {
            tape.gather_rows(e_all, &targets.ids)?
        };
        let probs = head_tape(
            &mut tape,
            e_lab,
            &head,
            model.arch.head_dropout,
            training,
            rng,
        )?;
        Some(tape.cross_entropy(probs, &one_hot)?)
    };
    let gamma = match mode {
        Mode::IcOnly => None,
        Mode::HcOnly => {
            let raw = tape.constant(ws.raw_pooled.clone());
            Some(hc_tape(&mut tape, ws.hier_adj.clone(), raw, v0, v1)?)
        }
        Mode::Seal | Mode::SealCi => Some(hc_tape(&mut tape, ws.hier_adj.clone(), e_all, v0, v1)?),
    };
    let ce_hc = match gamma {
        Some(g) => {
            let g_lab = tape.gather_rows(g, &targets.ids)?;
            Some(tape.cross_entropy(g_lab, &one_hot)?)
        }
        None => None,
    };
    let zeta = match (ce_ic, ce_hc) {
        (Some(a), Some(b)) => tape.add(a, b)?,
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => unreachable!("every mode trains at least one classifier"),
    };

    let mut h_all: Option<Var> = None;
    let mut mi_terms = (0.0, 0.0);
    let mut loss = zeta;
    if let (true, Some(g)) = (uses_mi, gamma) {
        let hcat = tape.param(stack_rows(
            &local.iter().map(|l| &l.h).collect::<Vec<_>>(),
            model.arch.node_dim,
        ));
        let batch = MiBatch::sample(&ws.sizes, settings.negative_ratio, rng)?;
        let inst = instance_mi_tape(&mut tape, hcat, &ws.offsets, e_all, w_di, &batch)?;
        let hier = hier_mi_fused_tape(&mut tape, e_all, g, w_dh)?;
        mi_terms = (tape.value(inst).item()?, tape.value(hier).item()?);
        let xi = tape.add(inst, hier)?;
        let weighted = tape.scale(xi, settings.alpha * settings.beta);
        loss = tape.sub(zeta, weighted)?;
        h_all = Some(hcat);
    }
    let loss_value = tape.value(loss).item()? + penalty_value;
    let zeta_value = tape.value(zeta).item()?;

    let grads = if with_grads {
        let outer = tape.backward(loss)?;
        let de_all = outer.get_or_zeros(e_all, tape.shape(e_all));
        let dh_all = h_all.map(|v| outer.get_or_zeros(v, tape.shape(v)));
        let positions: Vec<usize> = (0..encoded.len()).collect();
        let local_grads: Vec<EncoderGrads> = exec
            .map(&positions, |&k| {
                let i = encoded[k];
                let de = rows_slice(&de_all, k, k + 1);
                let dh = dh_all
                    .as_ref()
                    .map(|d| rows_slice(d, ws.offsets[i], ws.offsets[i + 1]));
                local[k].backward(
                    &ws.instances[i],
                    &model.ic,
                    &de,
                    dh.as_ref(),
                    penalty_weight,
                )
            })
            .into_iter()
            .collect::<Result<_, _>>()?;
        let mut enc = [&model.ic.w0, &model.ic.w1, &model.ic.ws1, &model.ic.ws2]
            .map(|t| Tensor::zeros(t.rows(), t.cols()));
        for g in &local_grads {
            for (acc, part) in enc.iter_mut().zip(g) {
                acc.add_assign(part)?;
            }
        }
        let mut out: Vec<Tensor> = enc.into_iter().collect();
        if let Some((w, b)) = head.hidden {
            out.push(outer.get_or_zeros(w, tape.shape(w)));
            out.push(outer.get_or_zeros(b, tape.shape(b)));
        }
        for v in [head.w, head.b, v0, v1, w_di, w_dh] {
            out.push(outer.get_or_zeros(v, tape.shape(v)));
        }
        Some(out)
    } else {
        None
    };

    Ok(ObjectiveValue {
        loss: loss_value,
        zeta: zeta_value,
        mi_inst: mi_terms.0,
        mi_hier: mi_terms.1,
        grads,
    })
}

/// Evaluation-mode outputs for every instance.
#[derive(Clone, Debug, PartialEq)]
pub struct Predictions {
    /// `N × m`; absent for HC-only models.
    pub embeddings: Option<Tensor>,
    /// `N × c`; absent for HC-only models.
    pub ic_probs: Option<Tensor>,
    /// `N × c`; absent for IC-only models.
    pub gamma: Option<Tensor>,
}

impl Predictions {
    /// Final classifier output: HC, except for IC-only models.
    pub fn final_probs(&self) -> &Tensor {
        self.gamma
            .as_ref()
            .or(self.ic_probs.as_ref())
            .expect("at least one classifier present")
    }
}

pub fn predict(
    model: &Model,
    ws: &Workspace,
    mode: Mode,
    exec: Exec,
) -> Result<Predictions, TrainError> {
    let mut tape = Tape::with_exec(exec);
    let (embeddings, ic_probs) = if mode == Mode::HcOnly {
        (None, None)
    } else {
        let ids: Vec<usize> = (0..ws.len()).collect();
        let local: Vec<EncoderCache> = exec
            .map(&ids, |&i| {
                EncoderCache::forward(&ws.instances[i], &model.ic)
            })
            .into_iter()
            .collect::<Result<_, _>>()?;
        let e = stack_rows(
            &local.iter().map(|l| &l.e).collect::<Vec<_>>(),
            model.arch.embedding_dim(),
        );
        let ev = tape.constant(e.clone());
        let head = HeadVars::params(&mut tape, &model.ic);
        let mut no_dropout = rand_chacha::ChaCha8Rng::from_seed([0; 32]);
        let probs = head_tape(&mut tape, ev, &head, 0.0, false, &mut no_dropout)?;
        (Some(e), Some(tape.value(probs).clone()))
    };
    let gamma = match mode {
        Mode::IcOnly => None,
        _ => {
            let input = match &embeddings {
                Some(e) => e.clone(),
                None => ws.raw_pooled.clone(),
            };
            let x = tape.constant(input);
            let v0 = tape.constant(model.hc.v0.clone());
            let v1 = tape.constant(model.hc.v1.clone());
            let g = hc_tape(&mut tape, ws.hier_adj.clone(), x, v0, v1)?;
            Some(tape.value(g).clone())
        }
    };
    Ok(Predictions {
        embeddings,
        ic_probs,
        gamma,
    })
}

fn mean_ce(probs: &Tensor, targets: &Targets) -> f64 {
    targets
        .ids
        .iter()
        .zip(&targets.labels)
        .map(|(&i, &y)| -probs.get(i, y).max(LOG_CLAMP).ln())
        .sum::<f64>()
        / targets.len() as f64
}

/// `ζ`: mean cross-entropy of the IC probabilities plus that of `Γ` over the
/// targets. Either classifier may be absent (ablation modes).
pub fn supervised_risk(
    ic_probs: Option<&Tensor>,
    gamma: Option<&Tensor>,
    targets: &Targets,
) -> Result<f64, TrainError> {
    if targets.is_empty() {
        return Err(TrainError::NoLabels);
    }
    Ok(ic_probs.map_or(0.0, |p| mean_ce(p, targets)) + gamma.map_or(0.0, |g| mean_ce(g, targets)))
}

/// `ζ − β ξ`.
pub fn total_loss(zeta: f64, xi: f64, beta: f64) -> f64 {
    zeta - beta * xi
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::Architecture;
    use crate::numeric::grad_check;
    use crate::trainer::test_support::toy_hierarchy;
    use rand_chacha::ChaCha8Rng;

    fn toy_model(h: &HierarchicalGraph, mode: Mode, seed: u64) -> Model {
        let mut arch = Architecture {
            in_dim: h.feature_dim(),
            gcn_hidden: 5,
            node_dim: 3,
            att_dim: 4,
            views: 2,
            num_classes: h.num_classes,
            hc_hidden: 4,
            attention_penalty: 0.05,
            ..Architecture::default()
        };
        arch.hc_in = if mode == Mode::HcOnly {
            2 * arch.in_dim
        } else {
            arch.embedding_dim()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = Model::init(arch, &mut rng);
        // Non-zero output layers so every gradient path is exercised.
        model.ic.w_head =
            crate::nets::glorot(model.ic.w_head.rows(), model.ic.w_head.cols(), &mut rng);
        model.hc.v1 = crate::nets::glorot(model.hc.v1.rows(), model.hc.v1.cols(), &mut rng);
        model
    }

    fn settings(mode: Mode) -> ObjectiveSettings {
        ObjectiveSettings {
            mode,
            alpha: 0.5,
            beta: 0.3,
            negative_ratio: 1,
        }
    }

    fn check_mode(mode: Mode) {
        let h = toy_hierarchy();
        let ws = Workspace::new(&h, Exec::Sequential).unwrap();
        let targets = Targets::new([(0, 0), (2, 1)]);
        let model = toy_model(&h, mode, 3);
        let params: Vec<Tensor> = model.tensors().into_iter().cloned().collect();
        let report = grad_check(
            |ps| {
                let mut m = model.clone();
                for (dst, src) in m.tensors_mut().into_iter().zip(ps) {
                    *dst = src.clone();
                }
                let mut rng = ChaCha8Rng::seed_from_u64(9);
                let v = objective(
                    &m,
                    &ws,
                    &targets,
                    &settings(mode),
                    false,
                    true,
                    &mut rng,
                    Exec::Sequential,
                )
                .map_err(|e| crate::numeric::NumericError::InvalidArgument {
                    op: "objective",
                    reason: e.to_string(),
                })?;
                Ok((v.loss, v.grads.unwrap()))
            },
            &params,
            1e-5,
            1e-4,
        )
        .unwrap();
        assert!(report.passed, "{mode:?}: {report:?}");
    }

    #[test]
    fn full_objective_gradient() {
        check_mode(Mode::Seal);
    }

    #[test]
    fn ablation_gradients() {
        check_mode(Mode::IcOnly);
        check_mode(Mode::HcOnly);
    }

    #[test]
    fn sequential_and_parallel_agree_bitwise() {
        let h = toy_hierarchy();
        let targets = Targets::new([(0, 0), (1, 1), (3, 0)]);
        let model = toy_model(&h, Mode::Seal, 4);
        let run = |exec| {
            let ws = Workspace::new(&h, exec).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            objective(
                &model,
                &ws,
                &targets,
                &settings(Mode::Seal),
                true,
                true,
                &mut rng,
                exec,
            )
            .unwrap()
        };
        let (a, b) = (run(Exec::Sequential), run(Exec::Parallel));
        assert_eq!(a.loss.to_bits(), b.loss.to_bits());
        assert_eq!(a.grads, b.grads);
    }

    #[test]
    fn zero_init_risk_is_twice_log_c() {
        let h = toy_hierarchy();
        let ws = Workspace::new(&h, Exec::Sequential).unwrap();
        let model = Model::init(
            toy_model(&h, Mode::Seal, 1).arch,
            &mut ChaCha8Rng::seed_from_u64(1),
        );
        let targets = Targets::new([(0, 0), (1, 1)]);
        let preds = predict(&model, &ws, Mode::Seal, Exec::Sequential).unwrap();
        let z = supervised_risk(preds.ic_probs.as_ref(), preds.gamma.as_ref(), &targets).unwrap();
        assert!((z - 2.0 * 2f64.ln()).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let v = objective(
            &model,
            &ws,
            &targets,
            &settings(Mode::Seal),
            false,
            false,
            &mut rng,
            Exec::Sequential,
        )
        .unwrap();
        assert!((v.zeta - z).abs() < 1e-12);
    }

    #[test]
    fn risk_examples() {
        let perfect = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let t = Targets::new([(0, 0), (1, 1)]);
        assert_eq!(
            supervised_risk(Some(&perfect), Some(&perfect), &t).unwrap(),
            0.0
        );
        let uniform = Tensor::filled(1, 7, 1.0 / 7.0);
        let z = supervised_risk(Some(&uniform), Some(&uniform), &Targets::new([(0, 3)])).unwrap();
        assert!((z - 2.0 * 7f64.ln()).abs() < 1e-14);
        // Hand-computed: −ln 0.6 − ln 0.75.
        let a = Tensor::row_vector(vec![0.6, 0.4]);
        let b = Tensor::row_vector(vec![0.75, 0.25]);
        let z = supervised_risk(Some(&a), Some(&b), &Targets::new([(0, 0)])).unwrap();
        assert!((z - (-(0.6f64.ln()) - 0.75f64.ln())).abs() < 1e-14);
        assert!(supervised_risk(Some(&a), None, &Targets::default()).is_err());
    }

    #[test]
    fn total_loss_is_linear() {
        assert_eq!(total_loss(1.5, 2.0, 0.0), 1.5);
        assert_eq!(total_loss(1.5, 0.0, 0.1), 1.5);
        assert_eq!(total_loss(1.0, 2.0, 0.25), 0.5);
    }
}
