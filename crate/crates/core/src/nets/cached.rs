//! Tape-free encoder pass with a hand-written backward, used by training.
//! Matches [`super::encode`] exactly in value; the tests below hold the two
//! to each other.

use super::{IcParams, NetError, PreparedInstance};
use crate::numeric::{softmax_in_place, Tensor};

/// Intermediates of one forward pass, kept for the backward pass.
#[derive(Clone, Debug)]
pub struct EncoderCache {
    /// `relu((Â X) W0)`, `n × h0`.
    h1: Tensor,
    /// Node representations, `n × v`.
    pub h: Tensor,
    /// `tanh(W_s1 Hᵀ)`, `d_att × n`.
    a: Tensor,
    /// Attention, `r × n`.
    pub s: Tensor,
    /// Embedding, `1 × r·v`.
    pub e: Tensor,
}

/// Encoder gradients in `[w0, w1, ws1, ws2]` order.
pub type EncoderGrads = [Tensor; 4];

fn check_width(inst: &PreparedInstance, p: &IcParams) -> Result<(), NetError> {
    if inst.ax.cols() != p.w0.rows() {
        return Err(NetError::FeatureWidth {
            expected: p.w0.rows(),
            found: inst.ax.cols(),
        });
    }
    Ok(())
}

impl EncoderCache {
    pub fn forward(inst: &PreparedInstance, p: &IcParams) -> Result<Self, NetError> {
        check_width(inst, p)?;
        let h1 = inst.ax.matmul(&p.w0)?.map(|x| x.max(0.0));
        let h = inst.adj.mul_dense(&h1.matmul(&p.w1)?)?;
        let a = p.ws1.matmul_t(&h)?.map(f64::tanh);
        let mut s = p.ws2.matmul(&a)?;
        for r in 0..s.rows() {
            softmax_in_place(s.row_mut(r));
        }
        let sh = s.matmul(&h)?;
        let e = Tensor::row_vector(sh.into_data());
        Ok(Self { h1, h, a, s, e })
    }

    /// `‖S Sᵀ − I‖²_F`.
    pub fn penalty(&self) -> f64 {
        let g = gram_minus_eye(&self.s);
        g.data().iter().map(|x| x * x).sum()
    }

    /// Backpropagates `de` (`1 × r·v`), an optional extra gradient on `H`
    /// and `penalty_weight · penalty`.
    pub fn backward(
        &self,
        inst: &PreparedInstance,
        p: &IcParams,
        de: &Tensor,
        dh_extra: Option<&Tensor>,
        penalty_weight: f64,
    ) -> Result<EncoderGrads, NetError> {
        let (r, n) = self.s.shape();
        let v = self.h.cols();
        let de = Tensor::new(r, v, de.data().to_vec())?;

        // e = S H
        let mut ds = de.matmul_t(&self.h)?;
        let mut dh = self.s.t_matmul(&de)?;
        if let Some(extra) = dh_extra {
            dh.add_assign(extra)?;
        }
        if penalty_weight != 0.0 {
            let g = gram_minus_eye(&self.s);
            let dp = g.matmul(&self.s)?;
            for (d, x) in ds.data_mut().iter_mut().zip(dp.data()) {
                *d += 4.0 * penalty_weight * x;
            }
        }

        // S = softmax_rows(W_s2 A)
        let mut dl = Tensor::zeros(r, n);
        for i in 0..r {
            let (srow, grow) = (self.s.row(i), ds.row(i));
            let inner: f64 = srow.iter().zip(grow).map(|(s, g)| s * g).sum();
            for ((d, &s), &g) in dl.row_mut(i).iter_mut().zip(srow).zip(grow) {
                *d = s * (g - inner);
            }
        }
        let dws2 = dl.matmul_t(&self.a)?;
        let mut du = p.ws2.t_matmul(&dl)?;

        // A = tanh(W_s1 Hᵀ)
        for (d, &a) in du.data_mut().iter_mut().zip(self.a.data()) {
            *d *= 1.0 - a * a;
        }
        let dws1 = du.matmul(&self.h)?;
        dh.add_assign(&du.t_matmul(&p.ws1)?)?;

        // H = Â (H1 W1)
        let dz = inst.adj.t_mul_dense(&dh)?;
        let dw1 = self.h1.t_matmul(&dz)?;
        let mut dh1 = dz.matmul_t(&p.w1)?;
        for (d, &x) in dh1.data_mut().iter_mut().zip(self.h1.data()) {
            if x <= 0.0 {
                *d = 0.0;
            }
        }
        let dw0 = inst.ax.t_matmul(&dh1)?;
        Ok([dw0, dw1, dws1, dws2])
    }
}

fn gram_minus_eye(s: &Tensor) -> Tensor {
    let mut g = s.matmul_t(s).expect("gram of a matrix with itself");
    for i in 0..g.rows() {
        let x = g.get(i, i);
        g.set(i, i, x - 1.0);
    }
    g
}
