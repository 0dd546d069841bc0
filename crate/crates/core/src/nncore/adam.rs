use super::matrix::Scalar;
use super::params::{Gradients, MlpParams};
use crate::{Error, Result};

/// Bias-corrected Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T = f32> {
    pub step: u64,
    /// First moments, one buffer per trainable tensor.
    pub m: Vec<Vec<T>>,
    /// Second moments, one buffer per trainable tensor.
    pub v: Vec<Vec<T>>,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub learning_rate: f64,
}

impl<T: Scalar> AdamState<T> {
    /// Zeroed moments with `β1 = 0.9`, `β2 = 0.999`, `ε = 1e-8`.
    pub fn new(params: &MlpParams<T>, learning_rate: f64) -> Self {
        Self::with_betas(params, learning_rate, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(
        params: &MlpParams<T>,
        learning_rate: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    ) -> Self {
        let shapes: Vec<usize> = Gradients::zeros_like(params)
            .tensors()
            .iter()
            .map(|t| t.len())
            .collect();
        let zeros = || shapes.iter().map(|&n| vec![T::zero(); n]).collect();
        Self {
            step: 0,
            m: zeros(),
            v: zeros(),
            beta1,
            beta2,
            epsilon,
            learning_rate,
        }
    }

    /// Applies one update to `params` and advances `step`.
    pub fn apply(&mut self, params: &mut MlpParams<T>, grads: &Gradients<T>) -> Result<()> {
        let grads = grads.tensors();
        let mut targets = params.trainable_mut();
        if grads.len() != targets.len() || self.m.len() != targets.len() {
            return Err(Error::Dimension(format!(
                "adam: {} gradient tensors, {} parameter tensors, {} moment buffers",
                grads.len(),
                targets.len(),
                self.m.len()
            )));
        }
        for (i, (g, p)) in grads.iter().zip(&targets).enumerate() {
            if g.len() != p.len() || self.m[i].len() != p.len() {
                return Err(Error::Dimension(format!(
                    "adam: tensor {i} has {} values but gradient has {}",
                    p.len(),
                    g.len()
                )));
            }
        }

        self.step += 1;
        let t = self.step as f64;
        let b1 = T::lit(self.beta1);
        let b2 = T::lit(self.beta2);
        let c1 = T::lit(1.0 - self.beta1);
        let c2 = T::lit(1.0 - self.beta2);
        let m_corr = T::lit(1.0 / (1.0 - self.beta1.powf(t)));
        let v_corr = T::lit(1.0 / (1.0 - self.beta2.powf(t)));
        let lr = T::lit(self.learning_rate);
        let eps = T::lit(self.epsilon);

        for (((p, g), m), v) in targets
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            for j in 0..p.len() {
                let gj = g[j];
                m[j] = b1 * m[j] + c1 * gj;
                v[j] = b2 * v[j] + c2 * gj * gj;
                let m_hat = m[j] * m_corr;
                let v_hat = v[j] * v_corr;
                p[j] = p[j] - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// One Adam update of `params` in place.
pub fn adam_step<T: Scalar>(
    params: &mut MlpParams<T>,
    grads: &Gradients<T>,
    state: &mut AdamState<T>,
) -> Result<()> {
    state.apply(params, grads)
}
