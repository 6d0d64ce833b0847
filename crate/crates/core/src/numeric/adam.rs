use serde::{Deserialize, Serialize};

use super::{NumericError, Tensor};

/// Bias-corrected Adam with per-parameter moment buffers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub first_moments: Vec<Tensor>,
    pub second_moments: Vec<Tensor>,
}

impl AdamState {
    pub fn new<'a>(lr: f64, params: impl IntoIterator<Item = &'a Tensor>) -> Self {
        let zeros: Vec<Tensor> = params
            .into_iter()
            .map(|p| Tensor::zeros(p.rows(), p.cols()))
            .collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first_moments: zeros.clone(),
            second_moments: zeros,
        }
    }

    pub fn step(
        &mut self,
        params: &mut [&mut Tensor],
        grads: &[Tensor],
    ) -> Result<(), NumericError> {
        if params.len() != self.first_moments.len() || grads.len() != params.len() {
            return Err(NumericError::InvalidArgument {
                op: "adam_step",
                reason: format!(
                    "{} params, {} grads, {} moment buffers",
                    params.len(),
                    grads.len(),
                    self.first_moments.len()
                ),
            });
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.first_moments) {
            if p.shape() != g.shape() || p.shape() != m.shape() {
                return Err(NumericError::Shape {
                    op: "adam_step",
                    lhs: p.shape(),
                    rhs: g.shape(),
                });
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(
            self.first_moments
                .iter_mut()
                .zip(self.second_moments.iter_mut()),
        ) {
            for (((w, &gi), mi), vi) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *w -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut p = Tensor::new(1, 3, vec![1.0, -2.0, 0.5]).unwrap();
        let before = p.clone();
        let mut adam = AdamState::new(0.01, [&p]);
        adam.step(&mut [&mut p], &[Tensor::zeros(1, 3)]).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m̂ = g and v̂ = g² after one bias-corrected step, so the move is lr·g/(|g|+ε).
        let mut p = Tensor::scalar(1.0);
        let mut adam = AdamState::new(0.01, [&p]);
        adam.step(&mut [&mut p], &[Tensor::scalar(1.0)]).unwrap();
        let expected = 1.0 - 0.01 * 1.0 / (1.0 + 1e-8);
        assert!((p.item().unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn identical_state_gives_identical_update() {
        let p0 = Tensor::new(2, 1, vec![0.3, -0.7]).unwrap();
        let g = Tensor::new(2, 1, vec![0.1, 2.0]).unwrap();
        let adam0 = AdamState::new(0.05, [&p0]);
        let run = || {
            let mut p = p0.clone();
            let mut adam = adam0.clone();
            adam.step(&mut [&mut p], std::slice::from_ref(&g)).unwrap();
            adam.step(&mut [&mut p], std::slice::from_ref(&g)).unwrap();
            (p, adam)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn mismatched_gradient_shape_is_an_error() {
        let mut p = Tensor::zeros(2, 2);
        let mut adam = AdamState::new(0.01, [&p]);
        assert!(adam.step(&mut [&mut p], &[Tensor::zeros(1, 2)]).is_err());
    }
}
