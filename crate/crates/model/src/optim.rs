//! Adam with decoupled weight decay.

use crate::params::Params;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

/// Moment estimates for every parameter tensor.
#[derive(Clone, Debug)]
pub struct AdamW {
    config: AdamConfig,
    step: u64,
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
}

impl AdamW {
    pub fn new(params: &Params<f32>, config: AdamConfig) -> Self {
        let zeros = || params.data.iter().map(|t| vec![0.0f32; t.len()]).collect();
        AdamW {
            config,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.config.lr = lr;
    }

    /// One update; weight decay applies only to tensors flagged `decay`.
    /// `τ` is clamped afterwards.
    pub fn step(&mut self, params: &mut Params<f32>, grads: &[Vec<f32>]) {
        assert_eq!(grads.len(), params.data.len());
        self.step += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        let (b1, b2) = (c.beta1 as f32, c.beta2 as f32);
        let step_size = (c.lr / bc1) as f32;
        let bc2_sqrt = bc2.sqrt() as f32;
        let eps = c.eps as f32;
        for (t, spec) in params.specs.iter().enumerate() {
            let decay = if spec.decay {
                (1.0 - c.lr * c.weight_decay) as f32
            } else {
                1.0
            };
            let (p, g, m, v) = (
                &mut params.data[t],
                &grads[t],
                &mut self.m[t],
                &mut self.v[t],
            );
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                p[i] = p[i] * decay - step_size * m[i] / (v[i].sqrt() / bc2_sqrt + eps);
            }
        }
        params.clamp_tau();
    }
}
