use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use modeconn::checkpoint::Checkpoint;
use modeconn::data::Dataset;
use modeconn::experiments::{
    connect, plane_surface, run_mode_zoo, run_sgdr_study, schedule_csv, schedule_table, segment,
    train_on, OutputDir, RunConfig,
};

#[derive(Parser)]
#[command(name = "modeconn", version, about = "Mode connectivity and loss-landscape experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the run seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let cfg = RunConfig::from_path(&self.config)
            .with_context(|| format!("loading {}", self.config.display()))?;
        Ok(match self.seed {
            Some(s) => cfg.with_run_seed(s),
            None => cfg,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train one mode, saving snapshots and a per-epoch log.
    Train(Common),
    /// Train a bend between two checkpoints and sweep the curve.
    Connect {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
    /// Scan the straight segment between two checkpoints for a barrier.
    Segment {
        #[command(flatten)]
        common: Common,
        /// λ = 1 end.
        #[arg(long)]
        m: PathBuf,
        /// λ = 0 end.
        #[arg(long)]
        n: PathBuf,
        /// Overrides analysis.barrier_points.
        #[arg(long)]
        points: Option<usize>,
    },
    /// Evaluate the loss surface on the plane through three checkpoints.
    Plane {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        p0: PathBuf,
        #[arg(long)]
        p1: PathBuf,
        #[arg(long)]
        p2: PathBuf,
        /// Checkpoints to project onto the plane, keyed by their epoch.
        #[arg(long = "iterate")]
        iterates: Vec<PathBuf>,
    },
    /// Train the base mode and every variant, then connect the base to each.
    Zoo(Common),
    /// Train with snapshots and run segment, curve and plane analyses.
    SgdrStudy(Common),
    /// Print the per-epoch learning rate table for the configured schedule.
    ScheduleDump {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the configured number of epochs.
        #[arg(long)]
        epochs: Option<u64>,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_checkpoint(path: &Path, cfg: &RunConfig) -> Result<Checkpoint> {
    let ck = Checkpoint::load(path).with_context(|| format!("loading {}", path.display()))?;
    if ck.spec != cfg.model {
        bail!("{} was trained with a different network than the config describes", path.display());
    }
    Ok(ck)
}

fn data(cfg: &RunConfig) -> Result<(Dataset, Dataset)> {
    Ok(cfg.task.build(cfg.seeds.data)?)
}

fn file_stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "ckpt".into(), |s| s.to_string_lossy().into_owned())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(common) => {
            let cfg = common.load()?;
            let (train, val) = data(&cfg)?;
            let outcome = train_on(&cfg, &train, &val)?;
            let mut out = OutputDir::create(&common.out_dir, "train", &cfg.digest())?;
            out.write("config.json", format!("{}\n", cfg.to_json_pretty()).as_bytes())?;
            outcome.write(&mut out, "")?;
            out.finish()?;
            if let Some(r) = outcome.log.last() {
                println!(
                    "epoch {}: train loss {:.5} acc {:.4}, val loss {:.5} acc {:.4}",
                    r.epoch, r.train_loss, r.train_acc, r.val_loss, r.val_acc
                );
            }
        }
        Command::Connect { common, a, b } => {
            let cfg = common.load()?;
            let (wa, wb) = (load_checkpoint(&a, &cfg)?, load_checkpoint(&b, &cfg)?);
            let (train, val) = data(&cfg)?;
            let label = format!("{}-{}", file_stem(&a), file_stem(&b));
            let result = connect(&cfg.curve, cfg.seeds.run, &label, &cfg.model, &wa.params, &wb.params, &train, &val)?;
            let mut out = OutputDir::create(&common.out_dir, "connect", &cfg.digest())?;
            for (stage, sweep) in &result.sweeps {
                out.write(&format!("curve_epoch{stage}.csv"), sweep.to_csv().as_bytes())?;
            }
            out.write_checkpoint("bend.ckpt", &result.bend_checkpoint(&cfg.model, &cfg, cfg.curve.epochs))?;
            out.finish()?;
            let s = result.final_sweep();
            println!(
                "curve max train loss {:.5}, min train acc {:.4}, min val acc {:.4}",
                s.max_train_loss(),
                s.min_train_acc(),
                s.min_val_acc()
            );
        }
        Command::Segment { common, m, n, points } => {
            let cfg = common.load()?;
            let (wm, wn) = (load_checkpoint(&m, &cfg)?, load_checkpoint(&n, &cfg)?);
            let (train, _) = data(&cfg)?;
            let points = points.unwrap_or(cfg.analysis.barrier_points);
            let r = segment(&cfg.model, &wm.params, &wn.params, points, &train)?;
            let mut out = OutputDir::create(&common.out_dir, "segment", &cfg.digest())?;
            out.write("segment.csv", r.scan.to_csv().as_bytes())?;
            out.write_json("barrier.json", &r.barrier)?;
            out.finish()?;
            println!(
                "has_barrier {} (height {:.5} at lambda {})",
                r.barrier.has_barrier, r.barrier.barrier_height, r.barrier.argmax_lambda
            );
        }
        Command::Plane { common, p0, p1, p2, iterates } => {
            let cfg = common.load()?;
            let anchors = [&p0, &p1, &p2]
                .map(|p| load_checkpoint(p, &cfg).map(|c| (file_stem(p), c)));
            let [a0, a1, a2] = anchors;
            let (a0, a1, a2) = (a0?, a1?, a2?);
            let iters = iterates
                .iter()
                .map(|p| load_checkpoint(p, &cfg))
                .collect::<Result<Vec<_>>>()?;
            let iter_refs: Vec<_> = iters.iter().map(|c| (c.epoch, &c.params)).collect();
            let (train, val) = data(&cfg)?;
            let r = plane_surface(
                &cfg.model,
                [(&a0.0, &a0.1.params), (&a1.0, &a1.1.params), (&a2.0, &a2.1.params)],
                &iter_refs,
                cfg.analysis.surface_resolution,
                cfg.analysis.surface_margin,
                &train,
                &val,
            )?;
            let mut out = OutputDir::create(&common.out_dir, "plane", &cfg.digest())?;
            out.write("surface.csv", r.surface.to_csv().as_bytes())?;
            out.write("surface.json", format!("{}\n", r.surface.sidecar_json()).as_bytes())?;
            out.finish()?;
            for w in &r.surface.warnings {
                eprintln!("warning: {w}");
            }
        }
        Command::Zoo(common) => {
            let cfg = common.load()?;
            let zoo = run_mode_zoo(&cfg)?;
            let manifest = zoo.write(&common.out_dir)?;
            for f in &manifest.failures {
                eprintln!("failed: {}: {}", f.leg, f.error);
            }
            if !manifest.complete {
                bail!("zoo finished with {} failed legs", manifest.failures.len());
            }
        }
        Command::SgdrStudy(common) => {
            let cfg = common.load()?;
            let study = run_sgdr_study(&cfg)?;
            study.write(&common.out_dir)?;
            for p in &study.pairs {
                let b = &p.segment.barrier;
                println!(
                    "pair w{}-w{}: has_barrier {} (height {:.5}), curve max train loss {:.5}",
                    p.pair[0],
                    p.pair[1],
                    b.has_barrier,
                    b.barrier_height,
                    p.curve.final_sweep().max_train_loss()
                );
            }
        }
        Command::ScheduleDump { config, epochs, out } => {
            let cfg = RunConfig::from_path(&config)
                .with_context(|| format!("loading {}", config.display()))?;
            let rows = schedule_table(&cfg.schedule, epochs.unwrap_or(cfg.epochs))?;
            let csv = schedule_csv(&rows);
            match out {
                Some(p) => std::fs::write(&p, csv).with_context(|| format!("writing {}", p.display()))?,
                None => std::io::stdout().write_all(csv.as_bytes())?,
            }
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
