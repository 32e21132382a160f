#![allow(dead_code)]

use std::path::PathBuf;

use modeconn::net::{MlpSpec, Objective};
use modeconn::{ParamVector, Result};

pub fn pv(v: &[f64]) -> ParamVector {
    ParamVector::new(v.to_vec()).unwrap()
}

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

/// Largest `|g − fd| / (1 + |fd|)` over every coordinate, with central
/// differences of step `h`.
pub fn fd_max_rel_error<F>(w: &ParamVector, grad: &ParamVector, h: f64, mut loss: F) -> f64
where
    F: FnMut(&ParamVector) -> f64,
{
    let mut worst: f64 = 0.0;
    for i in 0..w.len() {
        let mut plus = w.as_slice().to_vec();
        let mut minus = w.as_slice().to_vec();
        plus[i] += h;
        minus[i] -= h;
        let fd = (loss(&pv(&plus)) - loss(&pv(&minus))) / (2.0 * h);
        worst = worst.max((grad[i] - fd).abs() / (1.0 + fd.abs()));
    }
    worst
}

/// `𝓛(w) = (|w|² − 1)²`.
pub struct DoubleWell {
    pub dim: usize,
}

impl Objective for DoubleWell {
    fn dim(&self) -> usize {
        self.dim
    }
    fn loss_and_grad(&self, w: &ParamVector) -> Result<(f64, ParamVector)> {
        let r2 = w.dot(w)?;
        Ok(((r2 - 1.0).powi(2), w.scale(4.0 * (r2 - 1.0))))
    }
}

/// `𝓛(w) = |w|²`.
pub struct SquaredNorm {
    pub dim: usize,
}

impl Objective for SquaredNorm {
    fn dim(&self) -> usize {
        self.dim
    }
    fn loss_and_grad(&self, w: &ParamVector) -> Result<(f64, ParamVector)> {
        Ok((w.dot(w)?, w.scale(2.0)))
    }
}

/// Interior maximum against the larger endpoint, with the first index
/// winning ties.
pub fn brute_barrier(losses: &[f64]) -> (bool, f64, usize) {
    let ends = losses[0].max(*losses.last().unwrap());
    let mut best = 1;
    for i in 1..losses.len() - 1 {
        if losses[i] > losses[best] {
            best = i;
        }
    }
    (losses[best] > ends, losses[best] - ends, best)
}

pub fn small_spec(sizes: &[usize], act: modeconn::net::Activation) -> MlpSpec {
    MlpSpec::new(sizes.to_vec(), act).unwrap()
}
