use serde::{Deserialize, Serialize};

use super::mlp::{Gradients, Mlp};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::config("Adam betas must lie in [0, 1)"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::config("Adam epsilon must be positive"));
        }
        Ok(())
    }
}

/// First and second moment buffers for one network.
#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, mlp: &Mlp) -> Self {
        let sizes: Vec<usize> = mlp.layers().iter().flat_map(|l| [l.weights.len(), l.bias.len()]).collect();
        Adam {
            config,
            m: sizes.iter().map(|&s| vec![0.0; s]).collect(),
            v: sizes.iter().map(|&s| vec![0.0; s]).collect(),
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, mlp: &mut Mlp, grads: &Gradients) -> Result<()> {
        if grads.weights.len() != mlp.layers().len() {
            return Err(Error::shape("gradient count differs from layer count"));
        }
        self.step += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        for (l, layer) in mlp.layers_mut().iter_mut().enumerate() {
            let gw = grads.weights[l].as_standard_layout();
            let gb = grads.biases[l].as_standard_layout();
            let params = [
                (layer.weights.as_slice_mut().expect("standard layout"), gw.as_slice().unwrap()),
                (layer.bias.as_slice_mut().expect("standard layout"), gb.as_slice().unwrap()),
            ];
            for (slot, (p, g)) in params.into_iter().enumerate() {
                let idx = 2 * l + slot;
                if p.len() != g.len() {
                    return Err(Error::shape("gradient shape differs from parameter shape"));
                }
                let (m, v) = (&mut self.m[idx], &mut self.v[idx]);
                for i in 0..p.len() {
                    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
                    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
                    let mh = m[i] / bc1;
                    let vh = v[i] / bc2;
                    p[i] -= c.learning_rate * mh / (vh.sqrt() + c.epsilon);
                }
            }
        }
        if !mlp.is_finite() {
            return Err(Error::Numerical(format!("non-finite parameter after optimiser step {}", self.step)));
        }
        Ok(())
    }
}
