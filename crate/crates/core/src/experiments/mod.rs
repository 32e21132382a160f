//! End-to-end runs: training a mode, the mode zoo, and the restart-schedule
//! study. Every run writes into an [`OutputDir`] whose manifest lists each
//! file with its SHA-256.

mod analysis;
pub mod config;
mod output;
mod train;

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

pub use analysis::{connect, plane_surface, segment, ConnectResult, PlaneResult, SegmentResult};
pub use config::{AnalysisConfig, CurveConfig, RunConfig, TaskConfig, Variant};
pub use output::{sha256_hex, Artifact, Failure, Manifest, OutputDir, MANIFEST_FILE};
pub use train::{
    schedule_csv, schedule_table, train_mode, train_on, EpochRecord, ScheduleRow, TrainOutcome,
    LOG_CSV_HEADER, SCHEDULE_CSV_HEADER,
};

use crate::error::Result;
use crate::landscape::BarrierReport;

/// Name of the base run in the zoo.
pub const BASE_MODE: &str = "G";

fn sweep_path(dir: &str, stage: u64) -> String {
    format!("{dir}/curve_epoch{stage}.csv")
}

// ---------------------------------------------------------------- study

#[derive(Clone, Debug)]
pub struct PairResult {
    pub pair: [u64; 2],
    pub segment: SegmentResult,
    pub curve: ConnectResult,
}

impl PairResult {
    pub fn label(&self) -> String {
        format!("w{}_w{}", self.pair[0], self.pair[1])
    }
}

#[derive(Clone, Debug)]
pub struct StudyOutcome {
    pub config: RunConfig,
    pub train: TrainOutcome,
    pub pairs: Vec<PairResult>,
    pub plane: Option<PlaneResult>,
}

#[derive(Serialize)]
struct PairSummary<'a> {
    pair: [u64; 2],
    barrier: &'a BarrierReport,
    endpoint_train_loss: [f64; 2],
    endpoint_train_acc: [f64; 2],
    curve_max_train_loss: f64,
    curve_min_train_acc: f64,
    curve_min_val_acc: f64,
}

/// Trains one run and analyses its snapshots: a segment scan and a trained
/// curve for every configured pair, then the surface on the plane through
/// the plane pair and its bend, with every snapshot projected onto it.
pub fn run_sgdr_study(config: &RunConfig) -> Result<StudyOutcome> {
    config.validate_study()?;
    let (train, val) = config.task.build(config.seeds.data)?;
    let trained = train_on(config, &train, &val)?;
    let spec = &config.model;

    let mut wanted: Vec<[u64; 2]> = config.analysis.pairs.clone();
    if let Some(p) = config.analysis.plane_pair {
        if !wanted.contains(&p) {
            wanted.push(p);
        }
    }
    let pairs = wanted
        .par_iter()
        .map(|&[m, n]| {
            let w_m = &trained.snapshot(m)?.params;
            let w_n = &trained.snapshot(n)?.params;
            let label = format!("w{m}_w{n}");
            Ok(PairResult {
                pair: [m, n],
                segment: segment(spec, w_m, w_n, config.analysis.barrier_points, &train)?,
                curve: connect(&config.curve, config.seeds.run, &label, spec, w_m, w_n, &train, &val)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let plane = match config.analysis.plane_pair {
        None => None,
        Some(p @ [m, n]) => {
            let pr = pairs.iter().find(|r| r.pair == p).expect("plane pair was trained");
            let names = [format!("w_{m}"), format!("w_{n}"), format!("theta_{m}_{n}")];
            let iterates: Vec<_> = trained.snapshots.iter().map(|(e, c)| (*e, &c.params)).collect();
            Some(plane_surface(
                spec,
                [
                    (&names[0], &trained.snapshot(m)?.params),
                    (&names[1], &trained.snapshot(n)?.params),
                    (&names[2], pr.curve.chain.theta()),
                ],
                &iterates,
                config.analysis.surface_resolution,
                config.analysis.surface_margin,
                &train,
                &val,
            )?)
        }
    };
    let pairs = pairs
        .into_iter()
        .filter(|r| config.analysis.pairs.contains(&r.pair) || config.analysis.plane_pair == Some(r.pair))
        .collect();
    Ok(StudyOutcome {
        config: config.clone(),
        train: trained,
        pairs,
        plane,
    })
}

impl StudyOutcome {
    pub fn pair(&self, pair: [u64; 2]) -> Option<&PairResult> {
        self.pairs.iter().find(|r| r.pair == pair)
    }

    /// Writes the run, pair analyses, surface and schedule table, then the
    /// manifest.
    pub fn write(&self, root: &Path) -> Result<Manifest> {
        let digest = self.config.digest();
        let mut out = OutputDir::create(root, "sgdr-study", &digest)?;
        out.write("config.json", format!("{}\n", self.config.to_json_pretty()).as_bytes())?;
        self.train.write(&mut out, "")?;
        let rows = schedule_table(&self.config.schedule, self.config.epochs)?;
        out.write("schedule.csv", schedule_csv(&rows).as_bytes())?;
        let spec = &self.config.model;
        let mut summaries = Vec::new();
        for r in &self.pairs {
            let dir = format!("pairs/{}", r.label());
            out.write(&format!("{dir}/segment.csv"), r.segment.scan.to_csv().as_bytes())?;
            out.write_json(&format!("{dir}/barrier.json"), &r.segment.barrier)?;
            for (stage, sweep) in &r.curve.sweeps {
                out.write(&sweep_path(&dir, *stage), sweep.to_csv().as_bytes())?;
            }
            out.write_checkpoint(
                &format!("{dir}/bend.ckpt"),
                &r.curve.bend_checkpoint(spec, &self.config, self.config.curve.epochs),
            )?;
            let sweep = r.curve.final_sweep();
            let (first, last) = (&sweep.rows[0], sweep.rows.last().expect("non-empty"));
            summaries.push(PairSummary {
                pair: r.pair,
                barrier: &r.segment.barrier,
                endpoint_train_loss: [first.train_loss, last.train_loss],
                endpoint_train_acc: [first.train_acc, last.train_acc],
                curve_max_train_loss: sweep.max_train_loss(),
                curve_min_train_acc: sweep.min_train_acc(),
                curve_min_val_acc: sweep.min_val_acc(),
            });
        }
        out.write_json("pairs/summary.json", &summaries)?;
        if let Some(p) = &self.plane {
            out.write("plane/surface.csv", p.surface.to_csv().as_bytes())?;
            out.write("plane/surface.json", format!("{}\n", p.surface.sidecar_json()).as_bytes())?;
        }
        out.finish()
    }
}

// ---------------------------------------------------------------- zoo

#[derive(Debug)]
pub struct ZooMode {
    pub name: String,
    pub config: RunConfig,
    pub outcome: Result<TrainOutcome>,
}

#[derive(Debug)]
pub struct ZooCurve {
    pub name: String,
    pub outcome: Result<ConnectResult>,
}

#[derive(Debug)]
pub struct ZooOutcome {
    pub config: RunConfig,
    /// The base mode first, then the variants in config order.
    pub modes: Vec<ZooMode>,
    /// One curve from the base mode to each variant that trained.
    pub curves: Vec<ZooCurve>,
}

#[derive(Serialize)]
struct ZooSummary {
    mode: String,
    endpoint_val_acc: [f64; 2],
    curve_min_val_acc: f64,
    curve_min_train_acc: f64,
    curve_max_train_loss: f64,
}

/// Trains the base mode and every variant, then a curve from the base to
/// each variant, all evaluated on the base task's data. A failed leg is
/// recorded and does not stop the others; only a failed base is fatal.
pub fn run_mode_zoo(config: &RunConfig) -> Result<ZooOutcome> {
    config.validate()?;
    let base_cfg = config.without_variants();
    let (train, val) = base_cfg.task.build(base_cfg.seeds.data)?;
    let base = train_on(&base_cfg, &train, &val)?;

    let variants: Vec<ZooMode> = config
        .variants
        .par_iter()
        .map(|v| match config.variant(v) {
            Ok(cfg) => {
                let outcome = if cfg.task == base_cfg.task && cfg.seeds.data == base_cfg.seeds.data {
                    train_on(&cfg, &train, &val)
                } else {
                    train_mode(&cfg)
                };
                ZooMode {
                    name: v.name.clone(),
                    config: cfg,
                    outcome,
                }
            }
            Err(e) => ZooMode {
                name: v.name.clone(),
                config: base_cfg.clone(),
                outcome: Err(e),
            },
        })
        .collect();

    let w_g = base.final_checkpoint().params.clone();
    let curves = variants
        .par_iter()
        .filter_map(|m| {
            let trained = m.outcome.as_ref().ok()?;
            let label = format!("{BASE_MODE}-{}", m.name);
            Some(ZooCurve {
                outcome: connect(
                    &base_cfg.curve,
                    base_cfg.seeds.run,
                    &label,
                    &base_cfg.model,
                    &w_g,
                    &trained.final_checkpoint().params,
                    &train,
                    &val,
                ),
                name: m.name.clone(),
            })
        })
        .collect();

    let mut modes = vec![ZooMode {
        name: BASE_MODE.to_string(),
        config: base_cfg,
        outcome: Ok(base),
    }];
    modes.extend(variants);
    Ok(ZooOutcome {
        config: config.clone(),
        modes,
        curves,
    })
}

impl ZooOutcome {
    pub fn mode(&self, name: &str) -> Option<&ZooMode> {
        self.modes.iter().find(|m| m.name == name)
    }

    pub fn curve(&self, name: &str) -> Option<&ZooCurve> {
        self.curves.iter().find(|c| c.name == name)
    }

    pub fn write(&self, root: &Path) -> Result<Manifest> {
        let mut out = OutputDir::create(root, "zoo", &self.config.digest())?;
        out.write("config.json", format!("{}\n", self.config.to_json_pretty()).as_bytes())?;
        for m in &self.modes {
            match &m.outcome {
                Ok(t) => {
                    out.write_checkpoint(&format!("modes/{}.ckpt", m.name), t.final_checkpoint())?;
                    out.write(&format!("modes/{}_log.csv", m.name), t.log_csv().as_bytes())?;
                }
                Err(e) => out.fail(&format!("mode {}", m.name), e),
            }
        }
        let base_cfg = &self.modes[0].config;
        let mut summaries = Vec::new();
        for c in &self.curves {
            let dir = format!("curves/{BASE_MODE}-{}", c.name);
            match &c.outcome {
                Ok(r) => {
                    for (stage, sweep) in &r.sweeps {
                        out.write(&sweep_path(&dir, *stage), sweep.to_csv().as_bytes())?;
                    }
                    out.write_checkpoint(
                        &format!("{dir}/bend.ckpt"),
                        &r.bend_checkpoint(&base_cfg.model, base_cfg, base_cfg.curve.epochs),
                    )?;
                    let s = r.final_sweep();
                    summaries.push(ZooSummary {
                        mode: c.name.clone(),
                        endpoint_val_acc: [s.rows[0].val_acc, s.rows.last().expect("non-empty").val_acc],
                        curve_min_val_acc: s.min_val_acc(),
                        curve_min_train_acc: s.min_train_acc(),
                        curve_max_train_loss: s.max_train_loss(),
                    });
                }
                Err(e) => out.fail(&format!("curve {BASE_MODE}-{}", c.name), e),
            }
        }
        out.write_json("curves/summary.json", &summaries)?;
        out.finish()
    }
}
