use serde::{Deserialize, Serialize};

use super::SviError;

/// Adam with bias correction, ascending the objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(dim: usize) -> Self {
        Self::with_lr(dim, 0.01)
    }

    pub fn with_lr(dim: usize, lr: f64) -> Self {
        Self {
            t: 0,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// Moves `params` along `grads`. The state is untouched on error.
    pub fn step(&mut self, grads: &[f64], params: &mut [f64]) -> Result<(), SviError> {
        if grads.len() != self.m.len() || params.len() != self.m.len() {
            return Err(SviError::Dimension {
                expected: self.m.len(),
                got: grads.len().min(params.len()),
            });
        }
        if let Some(index) = grads.iter().position(|g| !g.is_finite()) {
            return Err(SviError::NonFiniteGradient { index });
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..grads.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] += self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// Functional form of [`AdamState::step`].
pub fn adam_step(mut state: AdamState, grads: &[f64], mut params: Vec<f64>) -> Result<(AdamState, Vec<f64>), SviError> {
    state.step(grads, &mut params)?;
    Ok((state, params))
}
