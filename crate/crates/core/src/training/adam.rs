use serde::{Deserialize, Serialize};

use crate::error::{QcnnError, Result};

/// Adam moments and learning-rate schedule `η_t = η₀·γ^⌊t/S⌋`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub eta0: f64,
    pub gamma: f64,
    pub decay_steps: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamHyper {
    pub fn validate(&self) -> Result<()> {
        if self.decay_steps == 0 {
            return Err(QcnnError::Config("decay_steps must be at least 1".into()));
        }
        if !(self.eta0 > 0.0) {
            return Err(QcnnError::Config(format!("eta0 must be positive, got {}", self.eta0)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(QcnnError::Config(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(QcnnError::Config(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(QcnnError::Config("epsilon must be positive".into()));
        }
        Ok(())
    }
}

pub fn lr_at(t: u64, hyper: &AdamHyper) -> Result<f64> {
    if hyper.decay_steps == 0 {
        return Err(QcnnError::Config("decay_steps must be at least 1".into()));
    }
    let tier = (t / hyper.decay_steps as u64) as i32;
    Ok(hyper.eta0 * hyper.gamma.powi(tier))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    /// Completed steps.
    pub t: u64,
}

impl OptimizerState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }
}

/// One bias-corrected Adam update in place. Step `t` (zero-based) uses
/// learning rate `lr_at(t)`.
pub fn adam_step(
    state: &mut OptimizerState,
    theta: &mut [f64],
    grad: &[f64],
    hyper: &AdamHyper,
) -> Result<()> {
    if theta.len() != grad.len() || state.m.len() != grad.len() || state.v.len() != grad.len() {
        return Err(QcnnError::Dimension(format!(
            "adam: theta {}, grad {}, moments {}/{}",
            theta.len(),
            grad.len(),
            state.m.len(),
            state.v.len()
        )));
    }
    let lr = lr_at(state.t, hyper)?;
    state.t += 1;
    let bc1 = 1.0 - hyper.beta1.powi(state.t as i32);
    let bc2 = 1.0 - hyper.beta2.powi(state.t as i32);
    for i in 0..grad.len() {
        let g = grad[i];
        state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * g;
        state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        theta[i] -= lr * m_hat / (v_hat.sqrt() + hyper.epsilon);
    }
    Ok(())
}
