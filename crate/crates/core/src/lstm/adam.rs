use serde::{Deserialize, Serialize};

use super::LstmError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
    pub amsgrad: bool,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.0,
            amsgrad: false,
            epochs: 100,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), LstmError> {
        let ok = self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0
            && self.weight_decay >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(LstmError::InvalidConfig(format!("{self:?}")))
        }
    }
}

/// Moment estimates for every parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub v_max: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            v_max: vec![0.0; n],
            step: 0,
        }
    }

    /// One bias-corrected Adam update, in the same arithmetic order as the
    /// common PyTorch implementation.
    pub fn update(&mut self, params: &mut [f64], grads: &[f64], cfg: &TrainConfig) -> Result<(), LstmError> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(LstmError::LengthMismatch {
                expected: self.m.len(),
                got: grads.len().min(params.len()),
            });
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(LstmError::NonFinite(format!("gradient {i} at step {}", self.step + 1)));
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        let step_size = cfg.learning_rate / bc1;
        for k in 0..params.len() {
            let g = grads[k] + cfg.weight_decay * params[k];
            self.m[k] = cfg.beta1 * self.m[k] + (1.0 - cfg.beta1) * g;
            self.v[k] = cfg.beta2 * self.v[k] + (1.0 - cfg.beta2) * g * g;
            let v = if cfg.amsgrad {
                self.v_max[k] = self.v_max[k].max(self.v[k]);
                self.v_max[k]
            } else {
                self.v[k]
            };
            let denom = v.sqrt() / bc2.sqrt() + cfg.epsilon;
            params[k] -= step_size * self.m[k] / denom;
        }
        Ok(())
    }
}
