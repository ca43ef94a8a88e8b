//! Experiment driver for hypernetwork Pareto front learning.
//!
//! Subcommands: `train`, `eval`, `hv`, `rays`, `sweep`. Exit codes are 0 on
//! success, 2 for configuration errors, 3 for numeric failures and 4 for I/O.

pub mod config;
pub mod error;
pub mod run;
pub mod sweep;

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use pfl_core::csvio::{read_points_csv, write_rays_csv};
use pfl_core::hypervolume::hv;
use pfl_core::preference::test_rays;
use pfl_core::solver::SolverKind;

pub use config::ExperimentConfig;
pub use error::CliError;
pub use run::{run_eval, run_train, EvalRequest, RunOutcome};

#[derive(Debug, Parser)]
#[command(name = "pfl", version, about = "Pareto front learning with hypernetworks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a hypernetwork and evaluate it.
    Train(TrainArgs),
    /// Re-evaluate a saved checkpoint.
    Eval(EvalArgs),
    /// Hypervolume of the points in a CSV file.
    Hv(HvArgs),
    /// Print evaluation rays as CSV.
    Rays(RaysArgs),
    /// Train once per value of one config field.
    Sweep(SweepArgs),
}

/// Overrides applied on top of the config file.
#[derive(Debug, Default, Args)]
pub struct Overrides {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub problem: Option<String>,
    #[arg(long)]
    pub solver: Option<SolverKind>,
    #[arg(long)]
    pub rays: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub iters: Option<u64>,
    #[arg(long)]
    pub warmup: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated reference point, e.g. `2,2`.
    #[arg(long = "ref", value_parser = parse_vector)]
    pub ref_point: Option<Vector>,
    #[arg(long)]
    pub partition: Option<bool>,
    #[arg(long)]
    pub eval_rays: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Overrides {
    /// Config file (or defaults) with every given flag applied.
    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = &self.problem {
            cfg.problem = v.clone();
        }
        if let Some(v) = self.solver {
            cfg.train.solver = v;
        }
        if let Some(v) = self.rays {
            cfg.train.rays = v;
        }
        if let Some(v) = self.lambda {
            cfg.train.lambda = v;
        }
        if let Some(v) = self.lr {
            cfg.train.lr = v;
        }
        if let Some(v) = self.iters {
            cfg.train.iterations = v;
        }
        if let Some(v) = self.warmup {
            cfg.train.warmup_steps = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.ref_point {
            cfg.train.ref_point = Some(v.0.clone());
        }
        if let Some(v) = self.partition {
            cfg.train.partition = v;
        }
        if let Some(v) = self.eval_rays {
            cfg.eval_rays = Some(v);
        }
        if let Some(v) = &self.out {
            cfg.out_dir = Some(v.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Run directory holding `config.toml` and `checkpoint.json`.
    #[arg(long)]
    pub run: PathBuf,
    /// Checkpoint to evaluate instead of the run's own.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub rays: Option<usize>,
    #[arg(long = "ref", value_parser = parse_vector)]
    pub ref_point: Option<Vector>,
    /// Output directory; defaults to `<run>/eval`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HvArgs {
    /// CSV with a header row and one point per row.
    #[arg(long)]
    pub points: PathBuf,
    #[arg(long = "ref", value_parser = parse_vector)]
    pub ref_point: Vector,
}

#[derive(Debug, Args)]
pub struct RaysArgs {
    #[arg(long)]
    pub objectives: usize,
    #[arg(long)]
    pub count: usize,
    /// Write to a file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub overrides: Overrides,
    /// `field=v1,v2,...` with field one of rays, lambda, lr, partition, seed, solver.
    #[arg(long)]
    pub axis: String,
    /// Runs executed concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

/// Comma-separated list of finite numbers.
#[derive(Clone, Debug, PartialEq)]
pub struct Vector(pub Vec<f64>);

fn parse_vector(s: &str) -> Result<Vector, String> {
    s.split(',')
        .map(|p| {
            let v: f64 = p.trim().parse().map_err(|_| format!("`{p}` is not a number"))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(format!("`{p}` is not finite"))
            }
        })
        .collect::<Result<_, _>>()
        .map(Vector)
}

/// Executes a parsed command, writing human-readable results to `stdout`.
pub fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Train(args) => {
            let cfg = args.overrides.resolve()?;
            let outcome = run_train(&cfg)?;
            writeln!(stdout, "{}", outcome.out_dir.display())?;
        }
        Command::Eval(args) => {
            let config = ExperimentConfig::load(&args.run.join(run::CONFIG_FILE))?;
            let req = EvalRequest {
                config,
                checkpoint: args
                    .checkpoint
                    .unwrap_or_else(|| args.run.join(run::CHECKPOINT_FILE)),
                rays: args.rays,
                ref_point: args.ref_point.map(|v| v.0),
                out_dir: args.out.unwrap_or_else(|| args.run.join("eval")),
            };
            let report = run_eval(&req)?;
            writeln!(stdout, "{:?}", report.hv)?;
        }
        Command::Hv(args) => {
            let file = fs::File::open(&args.points)
                .map_err(|e| CliError::Io(format!("{}: {e}", args.points.display())))?;
            let points = read_points_csv(file)?;
            let value = if points.is_empty() { 0.0 } else { hv(&points, &args.ref_point.0)? };
            writeln!(stdout, "{value:?}")?;
        }
        Command::Rays(args) => {
            let rays = test_rays(args.objectives, args.count)?;
            match args.out {
                Some(path) => {
                    let mut buf = Vec::new();
                    write_rays_csv(&rays, &mut buf)?;
                    run::write_atomic(&path, &buf)?;
                }
                None => write_rays_csv(&rays, &mut *stdout)?,
            }
        }
        Command::Sweep(args) => {
            let base = args.overrides.resolve()?;
            let axis = sweep::Axis::parse(&args.axis)?;
            let summary = sweep::run_sweep(&base, &axis, args.jobs)?;
            for run in &summary.runs {
                writeln!(stdout, "{}\t{}", run.value, run.dir.display())?;
            }
        }
    }
    Ok(())
}
