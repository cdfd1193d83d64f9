//! Adam optimizer with optional global-norm gradient clipping.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::NnError;
use crate::params::ParamStore;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Rescale gradients whose global L2 norm exceeds this value.
    pub clip_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            clip_norm: Some(5.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

pub fn global_norm(grads: &[Array2<f64>]) -> f64 {
    grads
        .iter()
        .map(|g| g.iter().map(|x| x * x).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

impl Adam {
    pub fn new(config: AdamConfig, store: &ParamStore) -> Self {
        let zeros: Vec<Array2<f64>> = store
            .ids()
            .map(|id| Array2::zeros(store.value(id).dim()))
            .collect();
        Adam {
            config,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update; `grads` is aligned with the store's parameters.
    pub fn step(
        &mut self,
        store: &mut ParamStore,
        mut grads: Vec<Array2<f64>>,
    ) -> Result<(), NnError> {
        if grads.len() != self.m.len() {
            return Err(NnError::GradientCount {
                expected: self.m.len(),
                found: grads.len(),
            });
        }
        if let Some(max) = self.config.clip_norm {
            let norm = global_norm(&grads);
            if norm > max {
                grads.iter_mut().for_each(|g| *g *= max / norm);
            }
        }
        let values = store.values_mut()?;
        self.step += 1;
        let c = &self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        for ((w, g), (m, v)) in values
            .iter_mut()
            .zip(&grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            ndarray::Zip::from(w)
                .and(g)
                .and(m)
                .and(v)
                .for_each(|w, &g, m, v| {
                    *m = c.beta1 * *m + (1.0 - c.beta1) * g;
                    *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
                    *w -= c.learning_rate * (*m / bc1) / ((*v / bc2).sqrt() + c.epsilon);
                });
        }
        Ok(())
    }
}
