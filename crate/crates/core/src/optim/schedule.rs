//! Per-epoch learning-rate schedules.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cosine annealing with warm restarts.
///
/// `t_cur` counts epochs since the last restart and `t_i` is the current
/// period. When `t_cur` reaches `t_i` the schedule restarts and the period
/// grows by `t_mult`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgdrSchedule {
    pub eta_min: f64,
    pub eta_max: f64,
    pub t_0: u64,
    pub t_mult: u64,
    pub t_cur: u64,
    pub t_i: u64,
}

impl SgdrSchedule {
    pub fn new(eta_min: f64, eta_max: f64, t_0: u64, t_mult: u64) -> Result<Self> {
        let s = Self {
            eta_min,
            eta_max,
            t_0,
            t_mult,
            t_cur: 0,
            t_i: t_0,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta_min >= 0.0 && self.eta_min <= self.eta_max && self.eta_max.is_finite()) {
            return Err(Error::invalid(format!(
                "sgdr needs 0 <= eta_min <= eta_max, got ({}, {})",
                self.eta_min, self.eta_max
            )));
        }
        if self.t_0 == 0 || self.t_mult == 0 {
            return Err(Error::invalid("sgdr t_0 and t_mult must be positive"));
        }
        if self.t_i == 0 || self.t_cur > self.t_i {
            return Err(Error::invalid(format!(
                "sgdr state needs 0 <= t_cur <= t_i, got t_cur={} t_i={}",
                self.t_cur, self.t_i
            )));
        }
        Ok(())
    }

    /// `eta_min + ½(eta_max − eta_min)(1 + cos(π · t_cur / t_i))`
    pub fn lr(&self) -> f64 {
        if self.t_cur == 0 {
            return self.eta_max;
        }
        let ratio = self.t_cur as f64 / self.t_i as f64;
        let lr = self.eta_min + 0.5 * (self.eta_max - self.eta_min) * (1.0 + (PI * ratio).cos());
        lr.clamp(self.eta_min, self.eta_max)
    }

    /// Moves forward one epoch. Returns `true` when this epoch completed a
    /// period and triggered a restart.
    pub fn advance(&mut self) -> bool {
        self.t_cur += 1;
        if self.t_cur >= self.t_i {
            self.t_cur = 0;
            self.t_i = self.t_i.saturating_mul(self.t_mult);
            true
        } else {
            false
        }
    }
}

/// Cumulative epoch counts at which restarts happen, up to `max_epoch`
/// inclusive: `T_0, T_0 + T_0·m, ...`.
pub fn sgdr_restart_epochs(t_0: u64, t_mult: u64, max_epoch: u64) -> Vec<u64> {
    let mut out = Vec::new();
    if t_0 == 0 || t_mult == 0 {
        return out;
    }
    let mut period = t_0;
    let mut at = t_0;
    while at <= max_epoch {
        out.push(at);
        period = period.saturating_mul(t_mult);
        at = at.saturating_add(period);
        if period == u64::MAX || at == u64::MAX {
            break;
        }
    }
    out
}

/// `eta0 / factor^(number of milestones <= epoch)`.
pub fn step_decay_lr(epoch: u64, eta0: f64, milestones: &[u64], factor: f64) -> Result<f64> {
    if !(factor > 0.0) {
        return Err(Error::invalid(format!("decay factor must be > 0, got {factor}")));
    }
    if milestones.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invalid(format!(
            "milestones must be sorted ascending: {milestones:?}"
        )));
    }
    let passed = milestones.iter().take_while(|&&m| m <= epoch).count();
    Ok(eta0 / factor.powi(passed as i32))
}

/// `eta0 + (eta_end − eta0) · epoch / total`.
pub fn linear_decay_lr(epoch: u64, total: u64, eta0: f64, eta_end: f64) -> Result<f64> {
    if total == 0 {
        return Err(Error::invalid("linear decay needs total > 0"));
    }
    if epoch > total {
        return Err(Error::invalid(format!(
            "epoch {epoch} outside linear decay range 0..={total}"
        )));
    }
    let frac = epoch as f64 / total as f64;
    Ok(eta0 * (1.0 - frac) + eta_end * frac)
}

/// Schedule choice as it appears in a run config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleConfig {
    Constant {
        lr: f64,
    },
    StepDecay {
        eta0: f64,
        milestones: Vec<u64>,
        factor: f64,
    },
    /// Decays from `eta0` at epoch 0 to `eta_end` at the run's final epoch.
    LinearDecay {
        eta0: f64,
        eta_end: f64,
    },
    Sgdr {
        eta_min: f64,
        eta_max: f64,
        t_0: u64,
        t_mult: u64,
    },
}

impl ScheduleConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive and finite, got {v}")))
            }
        };
        match self {
            ScheduleConfig::Constant { lr } => positive("lr", *lr),
            ScheduleConfig::StepDecay {
                eta0,
                milestones,
                factor,
            } => {
                positive("eta0", *eta0)?;
                step_decay_lr(0, *eta0, milestones, *factor).map(|_| ())
            }
            ScheduleConfig::LinearDecay { eta0, eta_end } => {
                positive("eta0", *eta0)?;
                if !(*eta_end >= 0.0) || !eta_end.is_finite() {
                    return Err(Error::invalid("eta_end must be finite and >= 0"));
                }
                Ok(())
            }
            ScheduleConfig::Sgdr {
                eta_min,
                eta_max,
                t_0,
                t_mult,
            } => {
                positive("eta_max", *eta_max)?;
                SgdrSchedule::new(*eta_min, *eta_max, *t_0, *t_mult).map(|_| ())
            }
        }
    }

    /// Epoch counts after which a snapshot is a "pre-restart" iterate.
    /// Empty for schedules without restarts.
    pub fn restart_epochs(&self, total_epochs: u64) -> Vec<u64> {
        match self {
            ScheduleConfig::Sgdr { t_0, t_mult, .. } => {
                sgdr_restart_epochs(*t_0, *t_mult, total_epochs)
            }
            _ => Vec::new(),
        }
    }
}

/// Running schedule state, one step per epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scheduler {
    config: ScheduleConfig,
    total_epochs: u64,
    epoch: u64,
    sgdr: Option<SgdrSchedule>,
}

impl Scheduler {
    pub fn new(config: ScheduleConfig, total_epochs: u64) -> Result<Self> {
        config.validate()?;
        let sgdr = match &config {
            ScheduleConfig::Sgdr {
                eta_min,
                eta_max,
                t_0,
                t_mult,
            } => Some(SgdrSchedule::new(*eta_min, *eta_max, *t_0, *t_mult)?),
            _ => None,
        };
        Ok(Self {
            config,
            total_epochs,
            epoch: 0,
            sgdr,
        })
    }

    /// Checks a deserialized state for consistency with its config.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        match (&self.config, &self.sgdr) {
            (ScheduleConfig::Sgdr { .. }, Some(s)) => s.validate(),
            (ScheduleConfig::Sgdr { .. }, None) => Err(Error::invalid("sgdr schedule without state")),
            (_, Some(_)) => Err(Error::invalid("sgdr state on a non-sgdr schedule")),
            (_, None) => Ok(()),
        }
    }

    /// Zero-based index of the epoch about to run.
    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn config(&self) -> &ScheduleConfig {
        &self.config
    }

    pub fn sgdr_state(&self) -> Option<&SgdrSchedule> {
        self.sgdr.as_ref()
    }

    /// Learning rate for the current epoch.
    pub fn lr(&self) -> f64 {
        match &self.config {
            ScheduleConfig::Constant { lr } => *lr,
            ScheduleConfig::StepDecay {
                eta0,
                milestones,
                factor,
            } => step_decay_lr(self.epoch, *eta0, milestones, *factor)
                .expect("validated at construction"),
            ScheduleConfig::LinearDecay { eta0, eta_end } => {
                let total = self.total_epochs.max(1);
                linear_decay_lr(self.epoch.min(total), total, *eta0, *eta_end)
                    .expect("epoch clamped to range")
            }
            ScheduleConfig::Sgdr { .. } => self.sgdr.as_ref().expect("sgdr state").lr(),
        }
    }

    /// Finishes the current epoch. Returns `true` on a warm restart.
    pub fn advance(&mut self) -> bool {
        self.epoch += 1;
        match &mut self.sgdr {
            Some(s) => s.advance(),
            None => false,
        }
    }
}
