//! Instance classifier (GCN + self-attentive pooling + dense head), hierarchy
//! classifier (GCN over instance embeddings) and the two bilinear
//! discriminators used by the mutual-information terms.

mod cached;
mod hc;
mod ic;

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{normalized_operator, GraphInstance};
use crate::numeric::{sigmoid, NumericError, SparseMatrix, Tensor};

pub use cached::{EncoderCache, EncoderGrads};
pub use hc::{hc_forward, hc_tape, HcParams};
#[cfg(test)]
pub(crate) use ic::attention_penalty;
pub use ic::{
    attention_pool, encode, gcn_layer, head_tape, ic_forward, Activation, Encoded, EncoderVars,
    HeadVars, IcOutput, IcParams,
};

#[derive(Debug, Error)]
pub enum NetError {
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("feature width {found} does not match the model input width {expected}")]
    FeatureWidth { expected: usize, found: usize },
}

/// Layer widths and regularization settings shared by IC and HC.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Architecture {
    pub in_dim: usize,
    pub gcn_hidden: usize,
    /// Width `v` of node representations.
    pub node_dim: usize,
    pub att_dim: usize,
    /// Number of attention views `r`; the instance embedding has `r · v` entries.
    pub views: usize,
    /// Optional hidden dense layer (relu) in the IC head.
    pub head_hidden: Option<usize>,
    pub head_dropout: f64,
    /// Input width of HC; equals the embedding width except for the raw-feature ablation.
    pub hc_in: usize,
    pub hc_hidden: usize,
    pub num_classes: usize,
    /// Coefficient of `‖S Sᵀ − I‖²_F`; zero disables the penalty.
    pub attention_penalty: f64,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            in_dim: 2,
            gcn_hidden: 32,
            node_dim: 4,
            att_dim: 16,
            views: 4,
            head_hidden: None,
            head_dropout: 0.3,
            hc_in: 16,
            hc_hidden: 16,
            num_classes: 7,
            attention_penalty: 0.0,
        }
    }
}

impl Architecture {
    pub fn embedding_dim(&self) -> usize {
        self.views * self.node_dim
    }
}

/// Bilinear discriminator weights.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscParams {
    /// `v × m`: node representation against instance embedding.
    pub w_di: Tensor,
    /// `m × c`: instance embedding against hierarchy class distribution.
    pub w_dh: Tensor,
}

impl DiscParams {
    pub fn init<R: Rng + ?Sized>(arch: &Architecture, rng: &mut R) -> Self {
        Self {
            w_di: glorot(arch.node_dim, arch.embedding_dim(), rng),
            w_dh: glorot(arch.embedding_dim(), arch.num_classes, rng),
        }
    }
}

fn bilinear(x: &[f64], w: &Tensor, y: &[f64]) -> Result<f64, NumericError> {
    if w.rows() != x.len() || w.cols() != y.len() {
        return Err(NumericError::Shape {
            op: "bilinear",
            lhs: (x.len(), y.len()),
            rhs: w.shape(),
        });
    }
    Ok((0..w.rows())
        .map(|i| x[i] * w.row(i).iter().zip(y).map(|(a, b)| a * b).sum::<f64>())
        .sum())
}

/// Raw bilinear score `hᵀ W e`, the input the JSD estimator consumes.
pub fn instance_score(h: &[f64], e: &[f64], w_di: &Tensor) -> Result<f64, NumericError> {
    bilinear(h, w_di, e)
}

/// Raw bilinear score `eᵀ W γ`.
pub fn hier_score(e: &[f64], gamma: &[f64], w_dh: &Tensor) -> Result<f64, NumericError> {
    bilinear(e, w_dh, gamma)
}

/// `σ(hᵀ W_DI e)`.
pub fn disc_instance(h: &[f64], e: &[f64], w_di: &Tensor) -> Result<f64, NumericError> {
    Ok(sigmoid(instance_score(h, e, w_di)?))
}

/// `σ(eᵀ W_DH γ)`.
pub fn disc_hier(e: &[f64], gamma: &[f64], w_dh: &Tensor) -> Result<f64, NumericError> {
    Ok(sigmoid(hier_score(e, gamma, w_dh)?))
}

/// All learnable weights of IC, HC and both discriminators.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub arch: Architecture,
    pub ic: IcParams,
    pub hc: HcParams,
    pub disc: DiscParams,
}

impl Model {
    /// Glorot-uniform hidden layers; the IC output head and the last HC layer
    /// start at zero so both classifiers begin uniform.
    pub fn init<R: Rng + ?Sized>(arch: Architecture, rng: &mut R) -> Self {
        let ic = IcParams::init(&arch, rng);
        let hc = HcParams::init(&arch, rng);
        let disc = DiscParams::init(&arch, rng);
        Self { arch, ic, hc, disc }
    }

    /// Parameters in a fixed order with stable names.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<(String, &Tensor)> = vec![
            ("ic.w0".into(), &self.ic.w0),
            ("ic.w1".into(), &self.ic.w1),
            ("ic.ws1".into(), &self.ic.ws1),
            ("ic.ws2".into(), &self.ic.ws2),
        ];
        if let Some((w, b)) = &self.ic.head_hidden {
            out.push(("ic.head_hidden.w".into(), w));
            out.push(("ic.head_hidden.b".into(), b));
        }
        out.extend([
            ("ic.w_head".into(), &self.ic.w_head),
            ("ic.b_head".into(), &self.ic.b_head),
            ("hc.v0".into(), &self.hc.v0),
            ("hc.v1".into(), &self.hc.v1),
            ("disc.w_di".into(), &self.disc.w_di),
            ("disc.w_dh".into(), &self.disc.w_dh),
        ]);
        out
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        self.named_tensors().into_iter().map(|(_, t)| t).collect()
    }

    /// Same order as [`Model::named_tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = vec![
            &mut self.ic.w0,
            &mut self.ic.w1,
            &mut self.ic.ws1,
            &mut self.ic.ws2,
        ];
        if let Some((w, b)) = &mut self.ic.head_hidden {
            out.push(w);
            out.push(b);
        }
        out.extend([
            &mut self.ic.w_head,
            &mut self.ic.b_head,
            &mut self.hc.v0,
            &mut self.hc.v1,
            &mut self.disc.w_di,
            &mut self.disc.w_dh,
        ]);
        out
    }
}

/// Constant per-instance operators: `Â` and `Â X`.
#[derive(Clone, Debug)]
pub struct PreparedInstance {
    pub adj: Arc<SparseMatrix>,
    pub ax: Tensor,
}

impl PreparedInstance {
    pub fn new(g: &GraphInstance) -> Result<Self, NetError> {
        let adj = normalized_operator(g.n, &g.edges);
        let ax = adj.mul_dense(&g.features)?;
        Ok(Self {
            adj: Arc::new(adj),
            ax,
        })
    }

    pub fn n(&self) -> usize {
        self.ax.rows()
    }
}

/// Glorot-uniform matrix: entries drawn from `U(−√(6/(rows+cols)), +√(6/(rows+cols)))`.
pub fn glorot<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Tensor {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-limit..limit))
        .collect();
    Tensor::new(rows, cols, data).expect("rows·cols values")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_discriminator_is_one_half() {
        let w = Tensor::zeros(3, 4);
        assert_eq!(disc_instance(&[1.0, 2.0, 3.0], &[1.0; 4], &w).unwrap(), 0.5);
        let w = Tensor::zeros(4, 2);
        assert_eq!(disc_hier(&[1.0; 4], &[0.3, 0.7], &w).unwrap(), 0.5);
    }

    #[test]
    fn discriminator_matches_scalar_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let w = glorot(3, 5, &mut rng);
            let h: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let e: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
            // Oracle: Σ_ij h_i W_ij e_j, then the logistic function.
            let mut s = 0.0;
            for (i, hi) in h.iter().enumerate() {
                for (j, ej) in e.iter().enumerate() {
                    s += hi * w.get(i, j) * ej;
                }
            }
            let want = 1.0 / (1.0 + (-s).exp());
            let got = disc_instance(&h, &e, &w).unwrap();
            assert!((got - want).abs() < 1e-14);
            assert!(got > 0.0 && got < 1.0);
        }
        assert!(disc_instance(&[1.0], &[1.0], &Tensor::zeros(2, 1)).is_err());
    }

    #[test]
    fn named_and_mutable_orders_agree() {
        let arch = Architecture {
            head_hidden: Some(8),
            ..Architecture::default()
        };
        let mut model = Model::init(arch, &mut ChaCha8Rng::seed_from_u64(0));
        let shapes: Vec<_> = model
            .named_tensors()
            .iter()
            .map(|(_, t)| t.shape())
            .collect();
        let mut_shapes: Vec<_> = model.tensors_mut().iter().map(|t| t.shape()).collect();
        assert_eq!(shapes, mut_shapes);
        assert_eq!(shapes.len(), 12);
    }
}
