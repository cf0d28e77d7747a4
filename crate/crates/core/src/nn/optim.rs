use serde::{Deserialize, Serialize};

use crate::autodiff::Matrix;
use crate::error::{Error, Result};

use super::NetworkWeights;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            lr: 2e-4,
            weight_decay: 1e-12,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.weight_decay >= 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::arg(
                "optimizer needs lr > 0, weight_decay >= 0, betas in [0, 1), eps > 0",
            ))
        }
    }
}

/// Adam with decoupled weight decay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamW {
    pub config: OptimizerConfig,
    pub step: u64,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
}

impl AdamW {
    pub fn new(config: OptimizerConfig, weights: &NetworkWeights) -> Result<Self> {
        config.validate()?;
        let zeros = || {
            weights
                .tensors()
                .iter()
                .map(|t| Matrix::zeros(t.rows, t.cols))
                .collect()
        };
        Ok(AdamW {
            config,
            step: 0,
            m: zeros(),
            v: zeros(),
        })
    }

    pub fn update(&mut self, weights: &mut NetworkWeights, grads: &[Matrix]) -> Result<()> {
        if grads.len() != self.m.len() || weights.len() != self.m.len() {
            return Err(Error::arg(
                "gradient list does not match the optimizer state",
            ));
        }
        self.step += 1;
        let c = &self.config;
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        for (((w, g), m), v) in weights
            .tensors_mut()
            .iter_mut()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            if w.data.len() != g.data.len() {
                return Err(Error::arg("gradient shape mismatch"));
            }
            for k in 0..w.data.len() {
                let gk = g.data[k];
                m.data[k] = c.beta1 * m.data[k] + (1.0 - c.beta1) * gk;
                v.data[k] = c.beta2 * v.data[k] + (1.0 - c.beta2) * gk * gk;
                let mh = m.data[k] / bc1;
                let vh = v.data[k] / bc2;
                w.data[k] -= c.lr * (mh / (vh.sqrt() + c.eps) + c.weight_decay * w.data[k]);
            }
        }
        if !weights.all_finite() {
            return Err(Error::numerical("optimizer produced non-finite weights"));
        }
        Ok(())
    }
}
