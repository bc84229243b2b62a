use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Parameterized, Real};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam moments for every tensor of one model, in visiting order.
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
}

impl<T: Real> AdamState<T> {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update using the model's accumulated gradients.
    pub fn step<P: Parameterized<T> + ?Sized>(&mut self, model: &mut P) -> Result<()> {
        if self.first.is_empty() {
            model.visit_params(&mut |s| {
                self.first.push(vec![T::zero(); s.value.len()]);
                self.second.push(vec![T::zero(); s.value.len()]);
            });
        }
        let t = self.step + 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let c1 = 1.0 - beta1.powi(t as i32);
        let c2 = 1.0 - beta2.powi(t as i32);
        let (b1, b2) = (T::of(beta1), T::of(beta2));
        let (ob1, ob2) = (T::of(1.0 - beta1), T::of(1.0 - beta2));
        let (inv_c1, inv_c2) = (T::of(1.0 / c1), T::of(1.0 / c2));
        let (lr, eps) = (T::of(learning_rate), T::of(epsilon));

        let mut idx = 0;
        let mut mismatch = None;
        model.visit_params(&mut |s| {
            let (Some(m), Some(v)) = (self.first.get_mut(idx), self.second.get_mut(idx)) else {
                mismatch.get_or_insert(idx);
                return;
            };
            if m.len() != s.value.len() {
                mismatch.get_or_insert(idx);
                return;
            }
            for (((p, &g), m), v) in s
                .value
                .iter_mut()
                .zip(s.grad.iter())
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                *m = b1 * *m + ob1 * g;
                *v = b2 * *v + ob2 * g * g;
                let m_hat = *m * inv_c1;
                let v_hat = *v * inv_c2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
            idx += 1;
        });
        if let Some(i) = mismatch.or((idx != self.first.len()).then_some(idx)) {
            return Err(Error::Shape(format!(
                "optimizer state does not match model at tensor {i}"
            )));
        }
        self.step = t;
        Ok(())
    }
}
