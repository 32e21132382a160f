//! Optimizers and learning-rate schedules.

mod schedule;

pub use schedule::{
    linear_decay_lr, sgdr_restart_epochs, step_decay_lr, ScheduleConfig, Scheduler, SgdrSchedule,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::ParamVector;

/// SGD with heavy-ball momentum and coupled L2 weight decay:
/// `buf ← momentum·buf + (g + weight_decay·w)`, `w ← w − lr·buf`.
#[derive(Clone, Debug, PartialEq)]
pub struct SgdState {
    pub momentum_buffer: ParamVector,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl SgdState {
    pub fn new(dim: usize, momentum: f64, weight_decay: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::invalid(format!("momentum must be in [0, 1), got {momentum}")));
        }
        if !(weight_decay >= 0.0) || !weight_decay.is_finite() {
            return Err(Error::invalid(format!("weight decay must be >= 0, got {weight_decay}")));
        }
        Ok(Self {
            momentum_buffer: ParamVector::zeros(dim),
            momentum,
            weight_decay,
        })
    }

    pub fn step(&mut self, w: &mut ParamVector, g: &ParamVector, lr: f64) -> Result<()> {
        g.check_len(w.len())?;
        w.check_len(self.momentum_buffer.len())?;
        let buf = self.momentum_buffer.as_mut_slice();
        let params = w.as_mut_slice();
        for ((b, p), gi) in buf.iter_mut().zip(params.iter_mut()).zip(g.as_slice()) {
            *b = self.momentum * *b + (gi + self.weight_decay * *p);
            *p -= lr * *b;
        }
        Ok(())
    }
}

/// Bias-corrected Adam with optional coupled L2 weight decay.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: ParamVector,
    pub v: ParamVector,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub step_count: u64,
}

impl AdamState {
    pub fn new(dim: usize, beta1: f64, beta2: f64, eps: f64, weight_decay: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) {
            return Err(Error::invalid("adam betas must be in [0, 1)"));
        }
        if !(eps > 0.0) {
            return Err(Error::invalid("adam eps must be > 0"));
        }
        if !(weight_decay >= 0.0) || !weight_decay.is_finite() {
            return Err(Error::invalid("weight decay must be >= 0"));
        }
        Ok(Self {
            m: ParamVector::zeros(dim),
            v: ParamVector::zeros(dim),
            beta1,
            beta2,
            eps,
            weight_decay,
            step_count: 0,
        })
    }

    /// `beta1 = 0.9`, `beta2 = 0.999`, `eps = 1e-8`.
    pub fn with_defaults(dim: usize, weight_decay: f64) -> Result<Self> {
        Self::new(dim, 0.9, 0.999, 1e-8, weight_decay)
    }

    pub fn step(&mut self, w: &mut ParamVector, g: &ParamVector, lr: f64) -> Result<()> {
        g.check_len(w.len())?;
        w.check_len(self.m.len())?;
        self.step_count += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step_count as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step_count as i32);
        let m = self.m.as_mut_slice();
        let v = self.v.as_mut_slice();
        let params = w.as_mut_slice();
        for i in 0..params.len() {
            let gi = g[i] + self.weight_decay * params[i];
            m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gi;
            v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gi * gi;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

fn default_momentum() -> f64 {
    0.9
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

/// Optimizer choice as it appears in a run config. The learning rate comes
/// from the schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimizerConfig {
    Sgd {
        #[serde(default = "default_momentum")]
        momentum: f64,
    },
    Adam {
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_eps")]
        eps: f64,
    },
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig::Sgd { momentum: 0.9 }
    }
}

impl OptimizerConfig {
    pub fn build(&self, dim: usize, weight_decay: f64) -> Result<Optimizer> {
        Ok(match self {
            OptimizerConfig::Sgd { momentum } => {
                Optimizer::Sgd(SgdState::new(dim, *momentum, weight_decay)?)
            }
            OptimizerConfig::Adam { beta1, beta2, eps } => {
                Optimizer::Adam(AdamState::new(dim, *beta1, *beta2, *eps, weight_decay)?)
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Optimizer {
    Sgd(SgdState),
    Adam(AdamState),
}

impl Optimizer {
    pub fn step(&mut self, w: &mut ParamVector, g: &ParamVector, lr: f64) -> Result<()> {
        match self {
            Optimizer::Sgd(s) => s.step(w, g, lr),
            Optimizer::Adam(s) => s.step(w, g, lr),
        }
    }
}
