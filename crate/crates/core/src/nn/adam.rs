//! Adam optimizer with bias correction.

use super::params::{Gradients, ParamSet};
use ndarray::Array2;

#[derive(Debug, Clone)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment state per parameter.
#[derive(Debug)]
pub struct Adam {
    config: AdamConfig,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
    step_count: u64,
}

impl Adam {
    pub fn new(params: &ParamSet, config: AdamConfig) -> Self {
        let m = params
            .ids()
            .map(|id| Array2::zeros(params.get(id).dim()))
            .collect::<Vec<_>>();
        let v = m.clone();
        Adam {
            config,
            m,
            v,
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Apply one update. Frozen parameters and parameters without gradients
    /// are left untouched.
    pub fn step(&mut self, params: &mut ParamSet, grads: &Gradients, lr: f64) {
        self.step_count += 1;
        let t = self.step_count as i32;
        let b1 = self.config.beta1;
        let b2 = self.config.beta2;
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        for id in params.ids().collect::<Vec<_>>() {
            if !params.is_trainable(id) {
                continue;
            }
            let Some(g) = grads.get(id) else { continue };
            let m = &mut self.m[id.0];
            let v = &mut self.v[id.0];
            m.zip_mut_with(g, |m, &g| *m = b1 * *m + (1.0 - b1) * g);
            v.zip_mut_with(g, |v, &g| *v = b2 * *v + (1.0 - b2) * g * g);
            let value = params.get_mut(id);
            for ((x, m), v) in value.iter_mut().zip(m.iter()).zip(v.iter()) {
                let m_hat = m / c1;
                let v_hat = v / c2;
                *x -= lr * m_hat / (v_hat.sqrt() + self.config.epsilon);
            }
        }
    }
}
