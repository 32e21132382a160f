//! JSON run configuration.
//!
//! One document describes the task, the network, how to train it, which
//! epochs to snapshot, and the settings for the analyses that consume those
//! snapshots. Unknown keys are rejected everywhere.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::checkpoint::RunSeeds;
use crate::curve::CurveTrainOptions;
use crate::data::{make_gaussians, make_spirals, Dataset, Split};
use crate::error::{Error, Result};
use crate::landscape::{DEFAULT_BARRIER_POINTS, DEFAULT_MARGIN};
use crate::net::MlpSpec;
use crate::optim::{OptimizerConfig, ScheduleConfig};
use crate::rng::RngStream;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskConfig {
    Spirals {
        n_train: usize,
        n_val: usize,
        turns: f64,
        noise: f64,
    },
    Gaussians {
        n_train: usize,
        n_val: usize,
        classes: usize,
        dim: usize,
        separation: f64,
    },
    /// External data: header row, a `label` column, numeric features.
    Csv { train: PathBuf, val: PathBuf },
}

impl TaskConfig {
    fn input_dim(&self) -> Option<usize> {
        match self {
            TaskConfig::Spirals { .. } => Some(2),
            TaskConfig::Gaussians { dim, .. } => Some(*dim),
            TaskConfig::Csv { .. } => None,
        }
    }

    fn classes(&self) -> Option<usize> {
        match self {
            TaskConfig::Spirals { .. } => Some(2),
            TaskConfig::Gaussians { classes, .. } => Some(*classes),
            TaskConfig::Csv { .. } => None,
        }
    }

    /// Train and validation sets. Synthetic tasks draw from streams keyed by
    /// `data_seed`, so every run with the same seed sees the same data.
    pub fn build(&self, data_seed: u64) -> Result<(Dataset, Dataset)> {
        let mut train_stream = RngStream::new(data_seed, "data/train");
        let mut val_stream = RngStream::new(data_seed, "data/val");
        match self {
            TaskConfig::Spirals {
                n_train,
                n_val,
                turns,
                noise,
            } => Ok((
                make_spirals(*n_train, *turns, *noise, &mut train_stream, Split::Train)?,
                make_spirals(*n_val, *turns, *noise, &mut val_stream, Split::Validation)?,
            )),
            TaskConfig::Gaussians {
                n_train,
                n_val,
                classes,
                dim,
                separation,
            } => Ok((
                make_gaussians(*n_train, *classes, *dim, *separation, &mut train_stream, Split::Train)?,
                make_gaussians(*n_val, *classes, *dim, *separation, &mut val_stream, Split::Validation)?,
            )),
            TaskConfig::Csv { train, val } => Ok((
                Dataset::from_csv_path(train, Split::Train)?,
                Dataset::from_csv_path(val, Split::Validation)?,
            )),
        }
    }
}

fn default_curve_epochs() -> u64 {
    80
}
fn default_grid_points() -> usize {
    21
}

/// Bend training budget and evaluation grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveConfig {
    /// Passes over the training set.
    #[serde(default = "default_curve_epochs")]
    pub epochs: u64,
    /// Epochs after which a sweep is written. The final epoch is always swept.
    #[serde(default)]
    pub stages: Vec<u64>,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default)]
    pub sgd: CurveTrainOptions,
    /// Per-epoch learning rate. Without one, `sgd.lr` is used throughout.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleConfig>,
}

impl Default for CurveConfig {
    fn default() -> Self {
        Self {
            epochs: default_curve_epochs(),
            stages: Vec::new(),
            grid_points: default_grid_points(),
            sgd: CurveTrainOptions::default(),
            schedule: None,
        }
    }
}

impl CurveConfig {
    pub fn iters_per_epoch(&self, n_train: usize) -> u64 {
        n_train.div_ceil(self.sgd.batch_size.max(1)) as u64
    }

    /// Sorted, deduplicated sweep stages including the final epoch.
    pub fn sweep_stages(&self) -> Vec<u64> {
        let mut s: BTreeSet<u64> = self.stages.iter().copied().collect();
        s.insert(self.epochs);
        s.into_iter().collect()
    }
}

fn default_barrier_points() -> usize {
    DEFAULT_BARRIER_POINTS
}
fn default_resolution() -> [usize; 2] {
    [21, 21]
}
fn default_margin() -> f64 {
    DEFAULT_MARGIN
}

/// Which snapshot pairs to compare and how to render the plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Snapshot epoch pairs `[m, n]` for segment scans and curves.
    #[serde(default)]
    pub pairs: Vec<[u64; 2]>,
    /// Pair whose bend spans the analysis plane with it.
    #[serde(default)]
    pub plane_pair: Option<[u64; 2]>,
    #[serde(default = "default_barrier_points")]
    pub barrier_points: usize,
    #[serde(default = "default_resolution")]
    pub surface_resolution: [usize; 2],
    #[serde(default = "default_margin")]
    pub surface_margin: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            pairs: Vec::new(),
            plane_pair: None,
            barrier_points: default_barrier_points(),
            surface_resolution: default_resolution(),
            surface_margin: default_margin(),
        }
    }
}

/// A named set of overrides applied to the base config as a JSON merge patch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    pub name: String,
    pub overrides: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: TaskConfig,
    pub model: MlpSpec,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    pub schedule: ScheduleConfig,
    pub epochs: u64,
    /// Values at or above the training-set size mean full-batch training.
    pub batch_size: usize,
    #[serde(default)]
    pub weight_decay: f64,
    /// Input jitter standard deviation; 0 disables augmentation.
    #[serde(default)]
    pub augment_sigma: f64,
    pub seeds: RunSeeds,
    #[serde(default)]
    pub snapshot_epochs: Vec<u64>,
    #[serde(default)]
    pub curve: CurveConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub variants: Vec<Variant>,
}

/// RFC 7386 JSON merge patch, except that an object whose `kind` differs
/// from the target's replaces it outright, so switching a tagged section
/// (optimizer, schedule, task) does not inherit the old variant's fields.
pub fn merge_patch(target: &mut Value, patch: &Value) {
    match patch {
        Value::Object(entries)
            if entries.get("kind").is_some_and(|k| target.get("kind") != Some(k)) =>
        {
            *target = patch.clone();
            strip_nulls(target);
        }
        Value::Object(entries) => {
            if !target.is_object() {
                *target = Value::Object(Default::default());
            }
            let map = target.as_object_mut().expect("object ensured");
            for (k, v) in entries {
                if v.is_null() {
                    map.remove(k);
                } else {
                    merge_patch(map.entry(k.clone()).or_insert(Value::Null), v);
                }
            }
        }
        other => *target = other.clone(),
    }
}

fn strip_nulls(v: &mut Value) {
    if let Value::Object(map) = v {
        map.retain(|_, x| !x.is_null());
        map.values_mut().for_each(strip_nulls);
    }
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::Config(vec![e.to_string()]))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the compact JSON serialization.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    /// Overrides the run seed (initialization, order, augmentation, curves).
    pub fn with_run_seed(mut self, seed: u64) -> Self {
        self.seeds.run = seed;
        self
    }

    /// Every problem with the config, not just the first.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let mut check = |r: Result<()>, ctx: &str| {
            if let Err(e) = r {
                errs.push(format!("{ctx}: {e}"));
            }
        };
        check(self.model.validate(), "model");
        check(self.schedule.validate(), "schedule");
        check(self.optimizer.build(0, self.weight_decay.max(0.0)).map(|_| ()), "optimizer");
        check(self.curve.sgd.validate(), "curve.sgd");
        if let Some(s) = &self.curve.schedule {
            check(s.validate(), "curve.schedule");
        }
        let mut errs_extra = Vec::new();
        if let Some(d) = self.task.input_dim() {
            if self.model.layer_sizes.first() != Some(&d) {
                errs_extra.push(format!(
                    "model input size {:?} does not match task input dimension {d}",
                    self.model.layer_sizes.first()
                ));
            }
        }
        if let Some(k) = self.task.classes() {
            if self.model.layer_sizes.last().is_some_and(|&o| o < k) {
                errs_extra.push(format!("model output size is smaller than the {k} task classes"));
            }
        }
        match &self.task {
            TaskConfig::Spirals {
                n_train,
                n_val,
                turns,
                noise,
            } => {
                if *n_train == 0 || *n_val == 0 {
                    errs_extra.push("task: n_train and n_val must be positive".into());
                }
                if !(*turns > 0.0) || !(*noise >= 0.0) {
                    errs_extra.push("task: turns must be > 0 and noise >= 0".into());
                }
            }
            TaskConfig::Gaussians {
                n_train,
                n_val,
                classes,
                dim,
                separation,
            } => {
                if *n_train == 0 || *n_val == 0 || *classes == 0 || *dim == 0 {
                    errs_extra.push("task: sizes must be positive".into());
                }
                if !separation.is_finite() {
                    errs_extra.push("task: separation must be finite".into());
                }
            }
            TaskConfig::Csv { .. } => {}
        }
        if self.batch_size == 0 {
            errs_extra.push("batch_size must be >= 1".into());
        }
        if !(self.weight_decay >= 0.0) || !self.weight_decay.is_finite() {
            errs_extra.push(format!("weight_decay must be >= 0, got {}", self.weight_decay));
        }
        if !(self.augment_sigma >= 0.0) || !self.augment_sigma.is_finite() {
            errs_extra.push(format!("augment_sigma must be >= 0, got {}", self.augment_sigma));
        }
        for &e in &self.snapshot_epochs {
            if e > self.epochs {
                errs_extra.push(format!("snapshot epoch {e} exceeds epochs = {}", self.epochs));
            }
        }
        for pair in self.analysis.pairs.iter().chain(self.analysis.plane_pair.iter()) {
            for &e in pair {
                if e > self.epochs {
                    errs_extra.push(format!("pair epoch {e} exceeds epochs = {}", self.epochs));
                }
            }
            if pair[0] == pair[1] {
                errs_extra.push(format!("pair {pair:?} connects a snapshot to itself"));
            }
        }
        if self.analysis.barrier_points < 3 {
            errs_extra.push("analysis.barrier_points must be >= 3".into());
        }
        if self.analysis.surface_resolution.contains(&0) {
            errs_extra.push("analysis.surface_resolution must be positive".into());
        }
        if !(self.analysis.surface_margin >= 0.0) || !self.analysis.surface_margin.is_finite() {
            errs_extra.push("analysis.surface_margin must be >= 0".into());
        }
        if self.curve.grid_points < 2 {
            errs_extra.push("curve.grid_points must be >= 2".into());
        }
        for &s in &self.curve.stages {
            if s > self.curve.epochs {
                errs_extra.push(format!("curve stage {s} exceeds curve.epochs = {}", self.curve.epochs));
            }
        }
        let mut names = BTreeSet::new();
        for v in &self.variants {
            if v.name.is_empty() || v.name.contains(['/', '\\']) || v.name == "G" {
                errs_extra.push(format!("variant name `{}` is not allowed", v.name));
            }
            if !names.insert(v.name.as_str()) {
                errs_extra.push(format!("duplicate variant name `{}`", v.name));
            }
            if !v.overrides.is_object() {
                errs_extra.push(format!("variant `{}`: overrides must be a JSON object", v.name));
            }
        }
        errs.extend(errs_extra);
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    /// Study configs use a restart or step schedule. With restarts, every
    /// pair epoch must be a pre-restart iterate.
    pub fn validate_study(&self) -> Result<()> {
        self.validate()?;
        match self.schedule {
            ScheduleConfig::Sgdr { .. } => {}
            ScheduleConfig::StepDecay { .. } => return Ok(()),
            _ => {
                return Err(Error::Config(vec![
                    "study needs an sgdr or step_decay schedule".into(),
                ]))
            }
        }
        let restarts = self.schedule.restart_epochs(self.epochs);
        let mut errs = Vec::new();
        for pair in self.analysis.pairs.iter().chain(self.analysis.plane_pair.iter()) {
            for &e in pair {
                if !restarts.contains(&e) {
                    errs.push(format!(
                        "pair epoch {e} is not a pre-restart iterate; restart epochs are {restarts:?}"
                    ));
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    /// Every epoch the training run must snapshot.
    pub fn required_snapshots(&self) -> BTreeSet<u64> {
        let mut s: BTreeSet<u64> = self.snapshot_epochs.iter().copied().collect();
        for pair in self.analysis.pairs.iter().chain(self.analysis.plane_pair.iter()) {
            s.extend(pair.iter().copied());
        }
        s.insert(self.epochs);
        s
    }

    /// The config for one variant: the base with `variants` dropped and the
    /// overrides merged in, then re-validated.
    pub fn variant(&self, variant: &Variant) -> Result<RunConfig> {
        let mut base = serde_json::to_value(self)?;
        if let Value::Object(map) = &mut base {
            map.remove("variants");
        }
        merge_patch(&mut base, &variant.overrides);
        let out: RunConfig = serde_json::from_value(base).map_err(|e| {
            Error::Config(vec![format!("variant `{}`: {e}", variant.name)])
        })?;
        out.validate().map_err(|e| match e {
            Error::Config(v) => Error::Config(
                v.into_iter()
                    .map(|m| format!("variant `{}`: {m}", variant.name))
                    .collect(),
            ),
            other => other,
        })?;
        Ok(out)
    }

    /// The base config with variants stripped.
    pub fn without_variants(&self) -> RunConfig {
        let mut c = self.clone();
        c.variants.clear();
        c
    }
}
