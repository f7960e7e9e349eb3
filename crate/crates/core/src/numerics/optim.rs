//! Adam with decoupled weight decay, and the warmup/linear-decay schedule.

use serde::{Deserialize, Serialize};

use super::params::{Gradients, ParamStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// Linear warmup over `warmup_fraction` of all steps, then linear decay to zero.
    #[default]
    WarmupLinear,
    /// `peak_lr` throughout.
    Constant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    pub peak_lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub warmup_fraction: f64,
    pub schedule: ScheduleKind,
    /// Global-norm gradient clipping threshold; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.01,
            dropout: 0.1,
            peak_lr: 5e-5,
            batch_size: 32,
            epochs: 3,
            warmup_fraction: 0.10,
            schedule: ScheduleKind::WarmupLinear,
            clip_norm: None,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.beta1 > 0.0 && self.beta1 < 1.0) || !(self.beta2 > 0.0 && self.beta2 < 1.0) {
            return bad(format!("betas must lie in (0, 1): {} {}", self.beta1, self.beta2));
        }
        if !(self.warmup_fraction > 0.0 && self.warmup_fraction < 1.0) {
            return bad(format!("warmup_fraction must lie in (0, 1): {}", self.warmup_fraction));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must lie in [0, 1): {}", self.dropout));
        }
        if !(self.peak_lr.is_finite() && self.peak_lr > 0.0) {
            return bad(format!("peak_lr must be positive: {}", self.peak_lr));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.weight_decay < 0.0 || self.epsilon <= 0.0 {
            return bad("weight_decay must be >= 0 and epsilon > 0".into());
        }
        Ok(())
    }

    pub fn lr_at(&self, step: usize, total_steps: usize) -> Result<f64> {
        match self.schedule {
            ScheduleKind::Constant => {
                if total_steps == 0 {
                    return Err(Error::InvalidArgument("total_steps must be positive".into()));
                }
                Ok(self.peak_lr)
            }
            ScheduleKind::WarmupLinear => {
                lr_schedule_with(step, total_steps, self.peak_lr, self.warmup_fraction)
            }
        }
    }
}

/// Warmup over the first 10% of steps, then linear decay to zero.
pub fn lr_schedule(step: usize, total_steps: usize, peak_lr: f64) -> Result<f64> {
    lr_schedule_with(step, total_steps, peak_lr, 0.10)
}

pub fn lr_schedule_with(
    step: usize,
    total_steps: usize,
    peak_lr: f64,
    warmup_fraction: f64,
) -> Result<f64> {
    if total_steps == 0 {
        return Err(Error::InvalidArgument("total_steps must be positive".into()));
    }
    if step > total_steps {
        return Err(Error::InvalidArgument(format!(
            "step {step} past total_steps {total_steps}"
        )));
    }
    let (s, total) = (step as f64, total_steps as f64);
    let warmup = warmup_fraction * total;
    Ok(if s <= warmup {
        peak_lr * s / warmup
    } else {
        peak_lr * (total - s) / (total - warmup)
    })
}

/// Adam moments plus decoupled weight decay:
/// `p -= lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * p)`.
#[derive(Clone, Debug)]
pub struct Adam {
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    weight_decay: f64,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(config: &OptimizerConfig, store: &ParamStore) -> Self {
        let zeros = || {
            store
                .iter()
                .map(|(_, t)| Tensor::new(t.shape().to_vec(), vec![0.0; t.len()]).expect("shape"))
                .collect()
        };
        Self {
            beta1: config.beta1,
            beta2: config.beta2,
            epsilon: config.epsilon,
            weight_decay: config.weight_decay,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update. A non-finite gradient leaves both the parameters
    /// and the optimizer state untouched.
    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients, lr: f64) -> Result<()> {
        for (id, g) in grads.iter() {
            if !g.all_finite() {
                return Err(Error::NonFinite(format!(
                    "gradient of {} at optimizer step {}",
                    store.name(id),
                    self.step + 1
                )));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (id, g) in grads.iter() {
            let (m, v) = (&mut self.m[id.0], &mut self.v[id.0]);
            let p = store.get_mut(id).data_mut();
            for k in 0..p.len() {
                let gk = g.data()[k];
                let mk = &mut m.data_mut()[k];
                *mk = self.beta1 * *mk + (1.0 - self.beta1) * gk;
                let vk = &mut v.data_mut()[k];
                *vk = self.beta2 * *vk + (1.0 - self.beta2) * gk * gk;
                let m_hat = *mk / c1;
                let v_hat = *vk / c2;
                p[k] -= lr * (m_hat / (v_hat.sqrt() + self.epsilon) + self.weight_decay * p[k]);
            }
        }
        Ok(())
    }
}
