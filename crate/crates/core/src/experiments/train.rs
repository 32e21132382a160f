use std::collections::BTreeMap;

use serde::Serialize;

use super::config::RunConfig;
use super::output::OutputDir;
use crate::checkpoint::Checkpoint;
use crate::data::{augment_jitter, batches, Dataset};
use crate::error::{Error, Result};
use crate::net::{backward, forward_loss, init_params};
use crate::optim::{ScheduleConfig, Scheduler};
use crate::rng::RngStream;
use crate::tensor::ParamVector;

/// Metrics after one epoch. `lr` is the rate used during that epoch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: u64,
    pub lr: f64,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

pub const LOG_CSV_HEADER: &str = "epoch,lr,train_loss,train_acc,val_loss,val_acc";

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub config_digest: String,
    pub epochs: u64,
    /// Checkpoints keyed by epoch; always contains the final epoch.
    pub snapshots: BTreeMap<u64, Checkpoint>,
    pub log: Vec<EpochRecord>,
}

impl TrainOutcome {
    pub fn final_checkpoint(&self) -> &Checkpoint {
        &self.snapshots[&self.epochs]
    }

    pub fn snapshot(&self, epoch: u64) -> Result<&Checkpoint> {
        self.snapshots
            .get(&epoch)
            .ok_or_else(|| Error::invalid(format!("no snapshot at epoch {epoch}")))
    }

    pub fn log_csv(&self) -> String {
        let mut out = format!("{LOG_CSV_HEADER}\n");
        for r in &self.log {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.epoch, r.lr, r.train_loss, r.train_acc, r.val_loss, r.val_acc
            ));
        }
        out
    }

    /// `{prefix}final.ckpt`, `{prefix}log.csv`, `{prefix}snapshots/w_{e}.ckpt`.
    pub fn write(&self, out: &mut OutputDir, prefix: &str) -> Result<()> {
        out.write_checkpoint(&format!("{prefix}final.ckpt"), self.final_checkpoint())?;
        out.write(&format!("{prefix}log.csv"), self.log_csv().as_bytes())?;
        for (e, c) in &self.snapshots {
            if *e != self.epochs {
                out.write_checkpoint(&format!("{prefix}snapshots/w_{e}.ckpt"), c)?;
            }
        }
        Ok(())
    }
}

/// Builds the datasets and trains.
pub fn train_mode(config: &RunConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let (train, val) = config.task.build(config.seeds.data)?;
    train_on(config, &train, &val)
}

/// Trains from the seeded initialization for `config.epochs` epochs.
/// `w_e` is the iterate after `e` full passes; `w_0` is the initialization.
pub fn train_on(config: &RunConfig, train: &Dataset, val: &Dataset) -> Result<TrainOutcome> {
    config.validate()?;
    let spec = &config.model;
    let digest = config.digest();
    let run = RngStream::new(config.seeds.run, "run");
    let mut w = init_params(spec, &mut run.derive("init"))?;
    let mut shuffle = run.derive("shuffle");
    let mut augment = run.derive("augment");
    let mut optimizer = config.optimizer.build(w.len(), config.weight_decay)?;
    let mut scheduler = Scheduler::new(config.schedule.clone(), config.epochs)?;
    let wanted = config.required_snapshots();
    let train_batch = train.full_batch();
    let val_batch = val.full_batch();

    let checkpoint = |epoch: u64, w: &ParamVector, s: &Scheduler| Checkpoint {
        epoch,
        params: w.clone(),
        spec: spec.clone(),
        schedule: Some(s.clone()),
        seeds: config.seeds,
        config_digest: digest.clone(),
    };

    let mut snapshots = BTreeMap::new();
    if wanted.contains(&0) {
        snapshots.insert(0, checkpoint(0, &w, &scheduler));
    }
    let mut log = Vec::with_capacity(config.epochs as usize);
    for epoch in 1..=config.epochs {
        let lr = scheduler.lr();
        for batch in batches(train, config.batch_size, &mut shuffle)? {
            let batch = if config.augment_sigma > 0.0 {
                augment_jitter(&batch, config.augment_sigma, &mut augment)?
            } else {
                batch
            };
            let (_, grad) = backward(spec, &w, &batch)?;
            optimizer.step(&mut w, &grad, lr)?;
        }
        scheduler.advance();
        if !w.is_finite() {
            return Err(Error::invalid(format!("training diverged during epoch {epoch}")));
        }
        let tr = forward_loss(spec, &w, &train_batch)?;
        let va = forward_loss(spec, &w, &val_batch)?;
        log.push(EpochRecord {
            epoch,
            lr,
            train_loss: tr.cross_entropy,
            train_acc: tr.accuracy,
            val_loss: va.cross_entropy,
            val_acc: va.accuracy,
        });
        log::debug!(
            "epoch {epoch} lr {lr:.3e} train {:.4} ({:.3}) val {:.4} ({:.3})",
            tr.cross_entropy,
            tr.accuracy,
            va.cross_entropy,
            va.accuracy
        );
        if wanted.contains(&epoch) {
            snapshots.insert(epoch, checkpoint(epoch, &w, &scheduler));
        }
    }
    Ok(TrainOutcome {
        config_digest: digest,
        epochs: config.epochs,
        snapshots,
        log,
    })
}

/// One row per epoch: the rate used in that epoch and whether a new cycle
/// starts there.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScheduleRow {
    pub epoch: u64,
    pub lr: f64,
    pub restart: bool,
}

pub const SCHEDULE_CSV_HEADER: &str = "epoch,lr,restart";

pub fn schedule_table(config: &ScheduleConfig, epochs: u64) -> Result<Vec<ScheduleRow>> {
    let mut s = Scheduler::new(config.clone(), epochs)?;
    let mut rows = Vec::with_capacity(epochs as usize);
    let mut restart = false;
    for epoch in 0..epochs {
        rows.push(ScheduleRow {
            epoch,
            lr: s.lr(),
            restart,
        });
        restart = s.advance();
    }
    Ok(rows)
}

pub fn schedule_csv(rows: &[ScheduleRow]) -> String {
    let mut out = format!("{SCHEDULE_CSV_HEADER}\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.epoch, r.lr, r.restart as u8));
    }
    out
}
