use crate::error::{Error, Result};
use crate::nn::ParamSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Rescale the whole gradient when its L2 norm exceeds this.
    pub clip_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            clip_norm: None,
        }
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    m: ParamSet,
    v: ParamSet,
}

impl Adam {
    pub fn new(params: &ParamSet, config: AdamConfig) -> Self {
        Adam {
            config,
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut ParamSet, grads: &ParamSet) -> Result<()> {
        if !params.same_layout(grads) {
            return Err(Error::Shape("gradient layout differs from parameters".into()));
        }
        let mut sq = 0.0;
        for (name, g) in grads.iter() {
            for &x in g.data() {
                if !x.is_finite() {
                    return Err(Error::Diverged(format!("non-finite gradient in {name}")));
                }
                sq += x * x;
            }
        }
        let clip = match self.config.clip_norm {
            Some(limit) if sq.sqrt() > limit => limit / sq.sqrt(),
            _ => 1.0,
        };
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            ..
        } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        let tensors = params.tensors_mut().iter_mut();
        let state = self.m.tensors_mut().iter_mut().zip(self.v.tensors_mut());
        for ((p, g), (m, v)) in tensors.zip(grads.tensors()).zip(state) {
            let p = p.data_mut();
            let (m, v) = (m.data_mut(), v.data_mut());
            for (k, &raw) in g.data().iter().enumerate() {
                let g = raw * clip;
                m[k] = beta1 * m[k] + (1.0 - beta1) * g;
                v[k] = beta2 * v[k] + (1.0 - beta2) * g * g;
                let m_hat = m[k] / bc1;
                let v_hat = v[k] / bc2;
                p[k] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}
