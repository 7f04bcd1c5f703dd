//! Adam optimizer with bias correction.

use super::unet::GradSet;
use super::SegNetError;

#[derive(Clone, Debug)]
pub struct AdamState {
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    /// Default parameters: lr 0.001, beta1 0.9, beta2 0.999, epsilon 1e-8.
    pub fn new(param_sizes: &[usize]) -> Self {
        Self::with_lr(param_sizes, 0.001)
    }

    pub fn with_lr(param_sizes: &[usize], lr: f64) -> Self {
        Self {
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m: param_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: param_sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    /// One bias-corrected update of every parameter tensor.
    pub fn apply(
        &mut self,
        params: &mut [&mut Vec<f64>],
        grads: &GradSet,
    ) -> Result<(), SegNetError> {
        if params.len() != self.m.len() || grads.tensors.len() != self.m.len() {
            return Err(SegNetError::ShapeMismatch(format!(
                "adam: {} params, {} grads, state for {}",
                params.len(),
                grads.tensors.len(),
                self.m.len()
            )));
        }
        for ((p, g), (m, v)) in params
            .iter()
            .zip(&grads.tensors)
            .zip(self.m.iter().zip(&self.v))
        {
            if p.len() != g.len() || p.len() != m.len() || p.len() != v.len() {
                return Err(SegNetError::ShapeMismatch(
                    "adam: tensor length mismatch".into(),
                ));
            }
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(&grads.tensors)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for i in 0..g.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}
