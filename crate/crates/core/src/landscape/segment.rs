use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::check_grid;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::net::{MlpObjective, MlpSpec, Objective};
use crate::tensor::{axpy_combine, ParamVector};

/// Losses along `λ·w_m + (1 − λ)·w_n`. `λ = 1` is `w_m`, `λ = 0` is `w_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentScan {
    pub w_m: ParamVector,
    pub w_n: ParamVector,
    pub lambda_grid: Vec<f64>,
    pub losses: Vec<f64>,
}

impl SegmentScan {
    pub const CSV_HEADER: &'static str = "lambda,loss";

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for (l, v) in self.lambda_grid.iter().zip(&self.losses) {
            out.push_str(&format!("{l},{v}\n"));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarrierReport {
    pub has_barrier: bool,
    pub max_interior_loss: f64,
    /// Max interior loss minus the larger endpoint loss.
    pub barrier_height: f64,
    pub argmax_lambda: f64,
    pub loss_at_zero: f64,
    pub loss_at_one: f64,
}

fn check_endpoint_grid(grid: &[f64]) -> Result<()> {
    check_grid(grid)?;
    if grid[0] != 0.0 || *grid.last().unwrap() != 1.0 {
        return Err(Error::invalid("segment grid must start at 0 and end at 1"));
    }
    Ok(())
}

pub fn scan_segment_with<O: Objective + ?Sized>(
    w_m: &ParamVector,
    w_n: &ParamVector,
    grid: &[f64],
    objective: &O,
) -> Result<SegmentScan> {
    w_n.check_len(w_m.len())?;
    check_endpoint_grid(grid)?;
    let losses = grid
        .par_iter()
        .map(|&lambda| objective.loss(&axpy_combine(&[lambda, 1.0 - lambda], &[w_m, w_n])?))
        .collect::<Result<Vec<_>>>()?;
    Ok(SegmentScan {
        w_m: w_m.clone(),
        w_n: w_n.clone(),
        lambda_grid: grid.to_vec(),
        losses,
    })
}

/// Full-dataset cross-entropy along the straight segment.
pub fn scan_segment(
    w_m: &ParamVector,
    w_n: &ParamVector,
    grid: &[f64],
    spec: &MlpSpec,
    data: &Dataset,
) -> Result<SegmentScan> {
    w_m.check_len(spec.num_params())?;
    let batch = data.full_batch();
    scan_segment_with(w_m, w_n, grid, &MlpObjective::new(spec, &batch))
}

/// A barrier exists iff some interior loss strictly exceeds the larger
/// endpoint loss. Ties for the interior maximum go to the smallest λ.
pub fn barrier_from_losses(grid: &[f64], losses: &[f64]) -> Result<BarrierReport> {
    if grid.len() != losses.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            found: losses.len(),
        });
    }
    if losses.len() < 3 {
        return Err(Error::invalid(format!(
            "barrier detection needs at least 3 grid points, got {}",
            losses.len()
        )));
    }
    let last = losses.len() - 1;
    let endpoint_max = losses[0].max(losses[last]);
    let mut best = 1;
    for i in 2..last {
        if losses[i] > losses[best] {
            best = i;
        }
    }
    let height = losses[best] - endpoint_max;
    Ok(BarrierReport {
        has_barrier: height > 0.0,
        max_interior_loss: losses[best],
        barrier_height: height,
        argmax_lambda: grid[best],
        loss_at_zero: losses[0],
        loss_at_one: losses[last],
    })
}

pub fn detect_barrier(scan: &SegmentScan) -> Result<BarrierReport> {
    barrier_from_losses(&scan.lambda_grid, &scan.losses)
}
