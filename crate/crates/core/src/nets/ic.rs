use std::sync::Arc;

use rand::{Rng, SeedableRng};

use super::{glorot, Architecture, NetError, PreparedInstance};
use crate::graph::GraphInstance;
use crate::numeric::{NumericError, SparseMatrix, Tape, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
}

/// Instance-classifier weights.
#[derive(Clone, Debug, PartialEq)]
pub struct IcParams {
    /// `d × gcn_hidden`
    pub w0: Tensor,
    /// `gcn_hidden × v`
    pub w1: Tensor,
    /// `d_att × v`
    pub ws1: Tensor,
    /// `r × d_att`
    pub ws2: Tensor,
    /// Optional `(m × hidden, 1 × hidden)` relu layer before the output layer.
    pub head_hidden: Option<(Tensor, Tensor)>,
    pub w_head: Tensor,
    pub b_head: Tensor,
}

impl IcParams {
    pub fn init<R: Rng + ?Sized>(arch: &Architecture, rng: &mut R) -> Self {
        let m = arch.embedding_dim();
        let head_hidden = arch
            .head_hidden
            .map(|h| (glorot(m, h, rng), Tensor::zeros(1, h)));
        let head_in = arch.head_hidden.unwrap_or(m);
        Self {
            w0: glorot(arch.in_dim, arch.gcn_hidden, rng),
            w1: glorot(arch.gcn_hidden, arch.node_dim, rng),
            ws1: glorot(arch.att_dim, arch.node_dim, rng),
            ws2: glorot(arch.views, arch.att_dim, rng),
            head_hidden,
            w_head: Tensor::zeros(head_in, arch.num_classes),
            b_head: Tensor::zeros(1, arch.num_classes),
        }
    }
}

/// Encoder weights registered on a tape.
#[derive(Clone, Copy, Debug)]
pub struct EncoderVars {
    pub w0: Var,
    pub w1: Var,
    pub ws1: Var,
    pub ws2: Var,
}

impl EncoderVars {
    pub fn params(tape: &mut Tape, p: &IcParams) -> Self {
        Self {
            w0: tape.param(p.w0.clone()),
            w1: tape.param(p.w1.clone()),
            ws1: tape.param(p.ws1.clone()),
            ws2: tape.param(p.ws2.clone()),
        }
    }

    pub fn constants(tape: &mut Tape, p: &IcParams) -> Self {
        Self {
            w0: tape.constant(p.w0.clone()),
            w1: tape.constant(p.w1.clone()),
            ws1: tape.constant(p.ws1.clone()),
            ws2: tape.constant(p.ws2.clone()),
        }
    }

    pub fn as_array(&self) -> [Var; 4] {
        [self.w0, self.w1, self.ws1, self.ws2]
    }
}

/// Head weights registered on a tape.
#[derive(Clone, Copy, Debug)]
pub struct HeadVars {
    pub hidden: Option<(Var, Var)>,
    pub w: Var,
    pub b: Var,
}

impl HeadVars {
    pub fn params(tape: &mut Tape, p: &IcParams) -> Self {
        Self {
            hidden: p
                .head_hidden
                .as_ref()
                .map(|(w, b)| (tape.param(w.clone()), tape.param(b.clone()))),
            w: tape.param(p.w_head.clone()),
            b: tape.param(p.b_head.clone()),
        }
    }
}

/// `act(Â · H · W)`, multiplying the dense factor first.
pub fn gcn_layer(
    tape: &mut Tape,
    adj: Arc<SparseMatrix>,
    h: Var,
    w: Var,
    act: Activation,
) -> Result<Var, NumericError> {
    let hw = tape.matmul(h, w)?;
    let out = tape.sparse_matmul(adj, hw)?;
    Ok(match act {
        Activation::Identity => out,
        Activation::Relu => tape.relu(out),
    })
}

/// Self-attentive pooling. Returns `(S, e)` with `S = softmax(W_s2 tanh(W_s1 Hᵀ))`
/// of shape `r × n` and `e = flatten(S H)` of shape `1 × r·v`.
pub fn attention_pool(
    tape: &mut Tape,
    h: Var,
    ws1: Var,
    ws2: Var,
) -> Result<(Var, Var), NumericError> {
    let ht = tape.transpose(h);
    let a = tape.matmul(ws1, ht)?;
    let a = tape.tanh(a);
    let logits = tape.matmul(ws2, a)?;
    let s = tape.softmax_rows(logits);
    let sh = tape.matmul(s, h)?;
    let (r, v) = tape.shape(sh);
    let e = tape.reshape(sh, 1, r * v)?;
    Ok((s, e))
}

/// Node representations, attention matrix and embedding of one instance.
#[derive(Clone, Copy, Debug)]
pub struct Encoded {
    pub h: Var,
    pub s: Var,
    pub e: Var,
}

/// Two GCN layers (relu, identity) followed by attention pooling.
/// `Â X` is precomputed, so the first layer is `relu((Â X) W0)`.
pub fn encode(
    tape: &mut Tape,
    inst: &PreparedInstance,
    vars: &EncoderVars,
) -> Result<Encoded, NetError> {
    let (d, _) = tape.shape(vars.w0);
    if inst.ax.cols() != d {
        return Err(NetError::FeatureWidth {
            expected: d,
            found: inst.ax.cols(),
        });
    }
    let ax = tape.constant(inst.ax.clone());
    let h1 = tape.matmul(ax, vars.w0)?;
    let h1 = tape.relu(h1);
    let h = gcn_layer(tape, inst.adj.clone(), h1, vars.w1, Activation::Identity)?;
    let (s, e) = attention_pool(tape, h, vars.ws1, vars.ws2)?;
    Ok(Encoded { h, s, e })
}

/// `‖S Sᵀ − I‖²_F` on the tape.
#[cfg(test)]
pub(crate) fn attention_penalty(tape: &mut Tape, s: Var) -> Result<Var, NumericError> {
    let st = tape.transpose(s);
    let gram = tape.matmul(s, st)?;
    let eye = tape.constant(Tensor::eye(tape.shape(s).0));
    let diff = tape.sub(gram, eye)?;
    let sq = tape.mul(diff, diff)?;
    Ok(tape.sum(sq))
}

/// Class probabilities for a batch of embeddings (`N × m`), with inverted
/// dropout on the head input during training.
pub fn head_tape<R: Rng + ?Sized>(
    tape: &mut Tape,
    e: Var,
    vars: &HeadVars,
    dropout: f64,
    training: bool,
    rng: &mut R,
) -> Result<Var, NumericError> {
    let mut x = tape.dropout(e, dropout, training, rng)?;
    if let Some((w, b)) = vars.hidden {
        let z = tape.matmul(x, w)?;
        let z = tape.add_row_bias(z, b)?;
        x = tape.relu(z);
    }
    let z = tape.matmul(x, vars.w)?;
    let z = tape.add_row_bias(z, vars.b)?;
    Ok(tape.softmax_rows(z))
}

/// Evaluation-mode IC output for one instance.
#[derive(Clone, Debug, PartialEq)]
pub struct IcOutput {
    /// `n × v`
    pub h: Tensor,
    /// `r × n`
    pub s: Tensor,
    /// `1 × r·v`
    pub e: Tensor,
    /// `1 × c`
    pub probs: Tensor,
}

pub fn ic_forward(g: &GraphInstance, p: &IcParams) -> Result<IcOutput, NetError> {
    let inst = PreparedInstance::new(g)?;
    let mut tape = Tape::new();
    let vars = EncoderVars::constants(&mut tape, p);
    let enc = encode(&mut tape, &inst, &vars)?;
    let head = HeadVars {
        hidden: p
            .head_hidden
            .as_ref()
            .map(|(w, b)| (tape.constant(w.clone()), tape.constant(b.clone()))),
        w: tape.constant(p.w_head.clone()),
        b: tape.constant(p.b_head.clone()),
    };
    let mut no_rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let probs = head_tape(&mut tape, enc.e, &head, 0.0, false, &mut no_rng)?;
    Ok(IcOutput {
        h: tape.value(enc.h).clone(),
        s: tape.value(enc.s).clone(),
        e: tape.value(enc.e).clone(),
        probs: tape.value(probs).clone(),
    })
}
