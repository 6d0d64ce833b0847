use std::sync::Arc;

use rand::Rng;

use super::{glorot, Architecture};
use crate::numeric::{NumericError, SparseMatrix, Tape, Tensor, Var};

/// Hierarchy-classifier weights.
#[derive(Clone, Debug, PartialEq)]
pub struct HcParams {
    /// `hc_in × hc_hidden`
    pub v0: Tensor,
    /// `hc_hidden × c`
    pub v1: Tensor,
}

impl HcParams {
    pub fn init<R: Rng + ?Sized>(arch: &Architecture, rng: &mut R) -> Self {
        Self {
            v0: glorot(arch.hc_in, arch.hc_hidden, rng),
            v1: Tensor::zeros(arch.hc_hidden, arch.num_classes),
        }
    }
}

/// `Γ = softmax(Â relu(Â E V0) V1)` on the tape; `E` is `N × hc_in`.
pub fn hc_tape(
    tape: &mut Tape,
    adj: Arc<SparseMatrix>,
    e: Var,
    v0: Var,
    v1: Var,
) -> Result<Var, NumericError> {
    let z = tape.matmul(e, v0)?;
    let z = tape.sparse_matmul(adj.clone(), z)?;
    let z = tape.relu(z);
    let z = tape.matmul(z, v1)?;
    let z = tape.sparse_matmul(adj, z)?;
    Ok(tape.softmax_rows(z))
}

/// Class distributions `Γ` (`N × c`) for every instance.
pub fn hc_forward(adj: &SparseMatrix, e: &Tensor, p: &HcParams) -> Result<Tensor, NumericError> {
    let mut tape = Tape::new();
    let ev = tape.constant(e.clone());
    let v0 = tape.constant(p.v0.clone());
    let v1 = tape.constant(p.v1.clone());
    let gamma = hc_tape(&mut tape, Arc::new(adj.clone()), ev, v0, v1)?;
    Ok(tape.value(gamma).clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::normalized_operator;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rows_are_distributions() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let arch = Architecture {
            hc_in: 6,
            num_classes: 3,
            ..Architecture::default()
        };
        let mut p = HcParams::init(&arch, &mut rng);
        p.v1 = glorot(arch.hc_hidden, 3, &mut rng);
        let edges = vec![(0, 1), (1, 2), (3, 4)];
        let adj = normalized_operator(5, &edges);
        let e = glorot(5, 6, &mut rng);
        let gamma = hc_forward(&adj, &e, &p).unwrap();
        assert_eq!(gamma.shape(), (5, 3));
        for i in 0..5 {
            let row = gamma.row(i);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|&x| x > 0.0));
        }
    }

    #[test]
    fn matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let arch = Architecture {
            hc_in: 4,
            hc_hidden: 5,
            num_classes: 2,
            ..Architecture::default()
        };
        let mut p = HcParams::init(&arch, &mut rng);
        p.v1 = glorot(5, 2, &mut rng);
        let adj = normalized_operator(4, &[(0, 1), (0, 2), (2, 3)]);
        let e = glorot(4, 4, &mut rng);
        let dense = adj.to_dense();
        let z = dense
            .matmul(
                &dense
                    .matmul(&e)
                    .unwrap()
                    .matmul(&p.v0)
                    .unwrap()
                    .map(|x| x.max(0.0)),
            )
            .unwrap()
            .matmul(&p.v1)
            .unwrap();
        let got = hc_forward(&adj, &e, &p).unwrap();
        for i in 0..4 {
            let (a, b) = (z.get(i, 0), z.get(i, 1));
            let want0 = 1.0 / (1.0 + (b - a).exp());
            assert!((got.get(i, 0) - want0).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_output_layer_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let arch = Architecture::default();
        let p = HcParams::init(&arch, &mut rng);
        let adj = normalized_operator(3, &[(0, 1)]);
        let gamma = hc_forward(&adj, &glorot(3, arch.hc_in, &mut rng), &p).unwrap();
        assert!(gamma.data().iter().all(|&x| (x - 1.0 / 7.0).abs() < 1e-15));
    }
}
