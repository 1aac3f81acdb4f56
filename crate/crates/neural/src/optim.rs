//! AdamW, elementwise gradient clipping and the learning-rate schedule.

use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// First/second moment estimates for a list of parameter tensors.
#[derive(Clone, Debug)]
pub struct AdamW<T> {
    pub config: AdamWConfig,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
    t: u64,
}

impl<T: Scalar> AdamW<T> {
    pub fn new(config: AdamWConfig, params: &[Tensor<T>]) -> Self {
        let zeros = || params.iter().map(|p| Tensor::zeros(p.rows(), p.cols())).collect();
        Self {
            config,
            m: zeros(),
            v: zeros(),
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// `theta <- theta - lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta)`.
    pub fn step(&mut self, params: &mut [Tensor<T>], grads: &[Tensor<T>], lr: f64) -> Result<()> {
        if !(lr > 0.0) {
            return Err(NnError::Config(format!("learning rate must be > 0, got {lr}")));
        }
        if params.len() != self.m.len() || grads.len() != params.len() {
            return Err(NnError::Shape(format!(
                "{} params / {} grads for an optimizer over {} tensors",
                params.len(),
                grads.len(),
                self.m.len()
            )));
        }
        self.t += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(self.t as i32);
        let bc2 = 1.0 - c.beta2.powi(self.t as i32);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            p.same_shape(g, "adamw")?;
            for (((pi, &gi), mi), vi) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                let gi = gi.as_f64();
                let mn = c.beta1 * mi.as_f64() + (1.0 - c.beta1) * gi;
                let vn = c.beta2 * vi.as_f64() + (1.0 - c.beta2) * gi * gi;
                *mi = T::of(mn);
                *vi = T::of(vn);
                let upd = (mn / bc1) / ((vn / bc2).sqrt() + c.eps) + c.weight_decay * pi.as_f64();
                *pi = T::of(pi.as_f64() - lr * upd);
            }
        }
        Ok(())
    }
}

/// Clamps every gradient entry to `[-c, c]`.
pub fn clip_grad_value<T: Scalar>(grads: &mut [Tensor<T>], c: f64) -> Result<()> {
    if !(c > 0.0) {
        return Err(NnError::Config(format!("clip value must be > 0, got {c}")));
    }
    let c = T::of(c);
    for g in grads {
        g.data_mut().iter_mut().for_each(|v| *v = v.max(-c).min(c));
    }
    Ok(())
}

/// Linear decay from `lr0` to a floor of `0.01 * lr0` at `total_steps`.
pub fn lr_lambda_schedule(step: usize, total_steps: usize, lr0: f64) -> f64 {
    let frac = if total_steps == 0 { 1.0 } else { step as f64 / total_steps as f64 };
    lr0 * (1.0 - frac).max(0.01)
}
