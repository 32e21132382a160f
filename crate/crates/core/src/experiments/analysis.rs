use super::config::{CurveConfig, RunConfig};
use crate::checkpoint::Checkpoint;
use crate::curve::{init_bend, sweep_curve, uniform_grid, CurveChain, CurveSweep, CurveTrainer};
use crate::data::Dataset;
use crate::error::Result;
use crate::landscape::{
    build_plane, detect_barrier, eval_surface, scan_segment, BarrierReport, Plane, SegmentScan,
    SurfaceGrid, SurfaceRanges,
};
use crate::net::MlpSpec;
use crate::optim::Scheduler;
use crate::rng::RngStream;
use crate::tensor::ParamVector;

/// A trained bend plus the sweep taken after each stage.
#[derive(Clone, Debug)]
pub struct ConnectResult {
    pub chain: CurveChain,
    /// `(curve epoch, sweep)` in stage order; the last entry is the final curve.
    pub sweeps: Vec<(u64, CurveSweep)>,
}

impl ConnectResult {
    pub fn final_sweep(&self) -> &CurveSweep {
        &self.sweeps.last().expect("final stage always swept").1
    }

    pub fn bend_checkpoint(&self, spec: &MlpSpec, config: &RunConfig, epochs: u64) -> Checkpoint {
        Checkpoint {
            epoch: epochs,
            params: self.chain.theta().clone(),
            spec: spec.clone(),
            schedule: None,
            seeds: config.seeds,
            config_digest: config.digest(),
        }
    }
}

/// Trains the bend between `w_a` and `w_b`, starting from their midpoint, and
/// sweeps the curve after every stage. `label` keys the random stream, so
/// distinct pairs draw independent `t` and batch sequences.
#[allow(clippy::too_many_arguments)]
pub fn connect(
    curve: &CurveConfig,
    seed: u64,
    label: &str,
    spec: &MlpSpec,
    w_a: &ParamVector,
    w_b: &ParamVector,
    train: &Dataset,
    val: &Dataset,
) -> Result<ConnectResult> {
    w_a.check_len(spec.num_params())?;
    let stream = RngStream::new(seed, format!("curve/{label}"));
    let mut trainer = CurveTrainer::new(init_bend(w_a, w_b)?, &curve.sgd, &stream)?;
    let grid = uniform_grid(curve.grid_points)?;
    let per_epoch = curve.iters_per_epoch(train.len());
    let mut scheduler = curve
        .schedule
        .as_ref()
        .map(|s| Scheduler::new(s.clone(), curve.epochs))
        .transpose()?;
    let mut done = 0;
    let mut sweeps = Vec::new();
    for stage in curve.sweep_stages() {
        let mut loss = 0.0;
        for _ in done..stage {
            if let Some(s) = &mut scheduler {
                trainer.set_lr(s.lr())?;
                s.advance();
            }
            loss = trainer.run(spec, train, per_epoch)?;
        }
        done = stage;
        log::info!("curve {label}: epoch {stage}, mean sampled loss {loss:.4}");
        sweeps.push((stage, sweep_curve(trainer.chain(), spec, train, val, &grid)?));
    }
    Ok(ConnectResult {
        chain: trainer.into_chain(),
        sweeps,
    })
}

#[derive(Clone, Debug)]
pub struct SegmentResult {
    pub scan: SegmentScan,
    pub barrier: BarrierReport,
}

/// Training loss on `points` evenly spaced λ values from `w_n` to `w_m`.
pub fn segment(
    spec: &MlpSpec,
    w_m: &ParamVector,
    w_n: &ParamVector,
    points: usize,
    train: &Dataset,
) -> Result<SegmentResult> {
    let scan = scan_segment(w_m, w_n, &uniform_grid(points)?, spec, train)?;
    let barrier = detect_barrier(&scan)?;
    Ok(SegmentResult { scan, barrier })
}

#[derive(Clone, Debug)]
pub struct PlaneResult {
    pub plane: Plane,
    pub surface: SurfaceGrid,
    /// Projection residual of each anchor onto its own plane.
    pub anchor_residuals: [f64; 3],
}

/// Surface over the plane through `anchors`, with `iterates` projected onto it.
pub fn plane_surface(
    spec: &MlpSpec,
    anchors: [(&str, &ParamVector); 3],
    iterates: &[(u64, &ParamVector)],
    resolution: [usize; 2],
    margin: f64,
    train: &Dataset,
    val: &Dataset,
) -> Result<PlaneResult> {
    let plane = build_plane(anchors[0].1, anchors[1].1, anchors[2].1)?;
    let ranges = SurfaceRanges::around_anchors(&plane, margin);
    let mut surface = eval_surface(&plane, ranges, resolution, spec, train, val)?;
    surface.name_anchors([anchors[0].0, anchors[1].0, anchors[2].0]);
    surface.add_iterates(&plane, iterates.iter().copied())?;
    let mut anchor_residuals = [0.0; 3];
    for (r, a) in anchor_residuals.iter_mut().zip(plane.anchors()) {
        *r = plane.project(a)?.residual_norm;
    }
    Ok(PlaneResult {
        plane,
        surface,
        anchor_residuals,
    })
}
