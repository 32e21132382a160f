//! Single-bend polygonal chains between two modes.
//!
//! The chain runs `w_a → θ → w_b` over `t ∈ [0, 1]`:
//!
//! ```text
//! φ(t) = 2(t·θ + (0.5 − t)·w_a)          for 0 ≤ t ≤ 0.5
//! φ(t) = 2((t − 0.5)·w_b + (1 − t)·θ)    for 0.5 < t ≤ 1
//! ```
//!
//! Only θ is trained. Each iteration samples one `t ~ U[0, 1)` and steps θ
//! along `∇_θ 𝓛(φ(t))`, an unbiased estimate of the gradient of the
//! expected loss along the chain.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{augment_jitter, batches, Batch, Dataset};
use crate::error::{Error, Result};
use crate::net::{forward_loss, MlpObjective, MlpSpec, Objective};
use crate::optim::SgdState;
use crate::rng::RngStream;
use crate::tensor::{axpy_combine, ParamVector};

#[derive(Clone, Debug, PartialEq)]
pub struct CurveChain {
    w_a: ParamVector,
    w_b: ParamVector,
    theta: ParamVector,
}

/// Chain with the bend at the midpoint of the endpoints.
pub fn init_bend(w_a: &ParamVector, w_b: &ParamVector) -> Result<CurveChain> {
    let theta = axpy_combine(&[0.5, 0.5], &[w_a, w_b])?;
    CurveChain::from_parts(w_a.clone(), w_b.clone(), theta)
}

fn toward_bend(end: &ParamVector, theta: &ParamVector, s: f64) -> ParamVector {
    if s == 1.0 {
        return theta.clone();
    }
    let v = end
        .as_slice()
        .iter()
        .zip(theta.as_slice())
        .map(|(a, b)| a + s * (b - a))
        .collect();
    ParamVector::from_vec_unchecked(v)
}

fn check_t(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid(format!("curve parameter t={t} outside [0, 1]")));
    }
    Ok(())
}

impl CurveChain {
    pub fn from_parts(w_a: ParamVector, w_b: ParamVector, theta: ParamVector) -> Result<Self> {
        w_b.check_len(w_a.len())?;
        theta.check_len(w_a.len())?;
        Ok(Self { w_a, w_b, theta })
    }

    pub fn w_a(&self) -> &ParamVector {
        &self.w_a
    }

    pub fn w_b(&self) -> &ParamVector {
        &self.w_b
    }

    pub fn theta(&self) -> &ParamVector {
        &self.theta
    }

    pub fn dim(&self) -> usize {
        self.w_a.len()
    }

    /// Point on the chain at `t`, evaluated as `a + s·(θ − a)` with
    /// `(a, s) = (w_a, 2t)` on the first half and `(w_b, 2(1 − t))` on the
    /// second. This form returns `w_a`, `w_b` and `θ` bit-exactly at
    /// `t = 0, 1, 0.5` and a constant point when all three coincide.
    pub fn phi(&self, t: f64) -> Result<ParamVector> {
        check_t(t)?;
        if t <= 0.5 {
            Ok(toward_bend(&self.w_a, &self.theta, 2.0 * t))
        } else {
            Ok(toward_bend(&self.w_b, &self.theta, 2.0 * (1.0 - t)))
        }
    }

    /// `∂φ(t)/∂θ`, the same scalar for every coordinate.
    pub fn bend_factor(t: f64) -> f64 {
        if t <= 0.5 {
            2.0 * t
        } else {
            2.0 * (1.0 - t)
        }
    }
}

/// Loss at `φ(t)` and its gradient with respect to the bend.
pub fn curve_grad<O: Objective + ?Sized>(
    chain: &CurveChain,
    t: f64,
    objective: &O,
) -> Result<(f64, ParamVector)> {
    let point = chain.phi(t)?;
    let (loss, grad_w) = objective.loss_and_grad(&point)?;
    Ok((loss, grad_w.scale(CurveChain::bend_factor(t))))
}

fn default_curve_lr() -> f64 {
    0.05
}
fn default_curve_batch() -> usize {
    32
}

/// SGD settings for bend training. Momentum and weight decay default to zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveTrainOptions {
    #[serde(default = "default_curve_lr")]
    pub lr: f64,
    #[serde(default)]
    pub momentum: f64,
    #[serde(default)]
    pub weight_decay: f64,
    #[serde(default = "default_curve_batch")]
    pub batch_size: usize,
    /// Input jitter applied to each training mini-batch.
    #[serde(default)]
    pub augment_sigma: f64,
}

impl Default for CurveTrainOptions {
    fn default() -> Self {
        Self {
            lr: default_curve_lr(),
            momentum: 0.0,
            weight_decay: 0.0,
            batch_size: default_curve_batch(),
            augment_sigma: 0.0,
        }
    }
}

impl CurveTrainOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::invalid(format!("curve lr must be positive, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("curve batch_size must be >= 1"));
        }
        if !(self.augment_sigma >= 0.0) {
            return Err(Error::invalid("curve augment_sigma must be >= 0"));
        }
        SgdState::new(0, self.momentum, self.weight_decay).map(|_| ())
    }
}

/// Stateful bend training. Endpoints are never written.
#[derive(Clone, Debug)]
pub struct CurveTrainer {
    chain: CurveChain,
    sgd: SgdState,
    lr: f64,
    options: CurveTrainOptions,
    t_stream: RngStream,
    shuffle_stream: RngStream,
    augment_stream: RngStream,
    queue: Vec<Batch>,
    iterations: u64,
}

impl CurveTrainer {
    pub fn new(chain: CurveChain, options: &CurveTrainOptions, stream: &RngStream) -> Result<Self> {
        options.validate()?;
        let sgd = SgdState::new(chain.dim(), options.momentum, options.weight_decay)?;
        Ok(Self {
            chain,
            sgd,
            lr: options.lr,
            options: options.clone(),
            t_stream: stream.derive("t"),
            shuffle_stream: stream.derive("shuffle"),
            augment_stream: stream.derive("augment"),
            queue: Vec::new(),
            iterations: 0,
        })
    }

    pub fn chain(&self) -> &CurveChain {
        &self.chain
    }

    pub fn into_chain(self) -> CurveChain {
        self.chain
    }

    pub fn iterations(&self) -> u64 {
        self.iterations
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn set_lr(&mut self, lr: f64) -> Result<()> {
        if !(lr > 0.0) || !lr.is_finite() {
            return Err(Error::invalid(format!("curve lr must be positive, got {lr}")));
        }
        self.lr = lr;
        Ok(())
    }

    /// One SGD step on θ against `objective` at a fresh `t`. Returns the
    /// sampled `t` and the loss at `φ(t)`.
    pub fn step<O: Objective + ?Sized>(&mut self, objective: &O) -> Result<(f64, f64)> {
        let t = self.t_stream.uniform01();
        let (loss, grad) = curve_grad(&self.chain, t, objective)?;
        self.sgd.step(&mut self.chain.theta, &grad, self.lr)?;
        self.iterations += 1;
        Ok((t, loss))
    }

    /// Runs `iters` mini-batch iterations over `data`, reshuffling at each
    /// epoch boundary. Returns the mean sampled loss.
    pub fn run(&mut self, spec: &MlpSpec, data: &Dataset, iters: u64) -> Result<f64> {
        let mut total = 0.0;
        for _ in 0..iters {
            if self.queue.is_empty() {
                let mut epoch = batches(data, self.options.batch_size, &mut self.shuffle_stream)?;
                epoch.reverse();
                self.queue = epoch;
            }
            let batch = self.queue.pop().expect("refilled above");
            let batch = if self.options.augment_sigma > 0.0 {
                augment_jitter(&batch, self.options.augment_sigma, &mut self.augment_stream)?
            } else {
                batch
            };
            let (_, loss) = self.step(&MlpObjective::new(spec, &batch))?;
            total += loss;
        }
        Ok(if iters == 0 { 0.0 } else { total / iters as f64 })
    }
}

/// Trains the bend for `iters` mini-batch iterations with plain SGD.
pub fn train_curve(
    chain: &CurveChain,
    spec: &MlpSpec,
    data: &Dataset,
    iters: u64,
    options: &CurveTrainOptions,
    stream: &RngStream,
) -> Result<CurveChain> {
    chain.w_a.check_len(spec.num_params())?;
    let mut trainer = CurveTrainer::new(chain.clone(), options, stream)?;
    trainer.run(spec, data, iters)?;
    Ok(trainer.into_chain())
}

/// `n` evenly spaced points from 0 to 1 inclusive.
pub fn uniform_grid(n: usize) -> Result<Vec<f64>> {
    match n {
        0 => Err(Error::invalid("grid needs at least one point")),
        1 => Ok(vec![0.0]),
        _ => Ok((0..n).map(|i| i as f64 / (n - 1) as f64).collect()),
    }
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid("empty grid"));
    }
    if grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::invalid("grid values must lie in [0, 1]"));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("grid must be strictly increasing"));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub t: f64,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveSweep {
    pub rows: Vec<SweepRow>,
}

impl CurveSweep {
    pub const CSV_HEADER: &'static str = "t,train_loss,train_acc,val_loss,val_acc";

    pub fn t_grid(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.t, r.train_loss, r.train_acc, r.val_loss, r.val_acc
            ));
        }
        out
    }

    pub fn max_train_loss(&self) -> f64 {
        self.rows.iter().map(|r| r.train_loss).fold(f64::MIN, f64::max)
    }

    pub fn min_val_acc(&self) -> f64 {
        self.rows.iter().map(|r| r.val_acc).fold(f64::MAX, f64::min)
    }

    pub fn min_train_acc(&self) -> f64 {
        self.rows.iter().map(|r| r.train_acc).fold(f64::MAX, f64::min)
    }
}

/// Train and validation metrics at every `t` in `t_grid`, on full datasets.
pub fn sweep_curve(
    chain: &CurveChain,
    spec: &MlpSpec,
    train: &Dataset,
    val: &Dataset,
    t_grid: &[f64],
) -> Result<CurveSweep> {
    check_grid(t_grid)?;
    chain.w_a.check_len(spec.num_params())?;
    let train_batch = train.full_batch();
    let val_batch = val.full_batch();
    let rows = t_grid
        .par_iter()
        .map(|&t| {
            let w = chain.phi(t)?;
            let tr = forward_loss(spec, &w, &train_batch)?;
            let va = forward_loss(spec, &w, &val_batch)?;
            Ok(SweepRow {
                t,
                train_loss: tr.cross_entropy,
                train_acc: tr.accuracy,
                val_loss: va.cross_entropy,
                val_acc: va.accuracy,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CurveSweep { rows })
}
