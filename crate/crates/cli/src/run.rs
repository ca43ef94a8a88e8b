//! Training and evaluation runs and the files they leave behind.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::{info, warn};
use pfl_core::evalkit::{evaluate, oracle_hv, EvalReport};
use pfl_core::network::{init_hypernet, Checkpoint, Hypernetwork};
use pfl_core::numerics::Rng;
use pfl_core::preference::{test_rays, PreferenceVector};
use pfl_core::problems::{
    default_oracle_resolution, load_tabular, synthetic_regression, Batch, Problem, Split,
    TabularDataset, TabularProblem,
};
use pfl_core::solver::{StepReport, Trainer};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub const METRICS_SCHEMA_VERSION: u32 = 1;

pub const CONFIG_FILE: &str = "config.toml";
pub const METRICS_FILE: &str = "metrics.jsonl";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const REPORT_FILE: &str = "report.json";
pub const FRONT_FILE: &str = "front.csv";

/// Random streams of a run, split off the master seed in a fixed order so the
/// dataset can be rebuilt identically at evaluation time.
struct Streams {
    data: Rng,
    init: Rng,
    train: Rng,
    batches: Rng,
}

impl Streams {
    fn new(seed: u64) -> Self {
        let mut master = Rng::new(seed);
        Self {
            data: master.split(),
            init: master.split(),
            train: master.split(),
            batches: master.split(),
        }
    }
}

fn build_problem_with(cfg: &ExperimentConfig, data_rng: &mut Rng) -> Result<Problem, CliError> {
    if !cfg.is_tabular() {
        return Ok(Problem::toy_by_name(&cfg.problem)?);
    }
    let d = &cfg.data;
    let ratios = cfg.split_ratios();
    let targets_from = |headers: &[String]| -> Vec<String> {
        if d.targets.is_empty() {
            headers.iter().filter(|h| h.starts_with('y')).cloned().collect()
        } else {
            d.targets.clone()
        }
    };
    let dataset = match &d.path {
        Some(path) => {
            let table = pfl_core::problems::Table::from_path(path)?;
            let targets = targets_from(&table.headers);
            load_tabular(path, &targets, ratios, d.scaling, data_rng)?
        }
        None => {
            let table = synthetic_regression(
                d.synthetic_rows,
                d.synthetic_features,
                d.synthetic_tasks,
                d.synthetic_noise,
                data_rng,
            );
            let targets = targets_from(&table.headers);
            TabularDataset::from_table(&table, &targets, ratios, d.scaling, data_rng)?
        }
    };
    Ok(Problem::Tabular(TabularProblem::new(
        Arc::new(dataset),
        d.target_hidden.clone(),
    )?))
}

/// Problem described by `cfg`, including the dataset split for tabular runs.
pub fn build_problem(cfg: &ExperimentConfig) -> Result<Problem, CliError> {
    build_problem_with(cfg, &mut Streams::new(cfg.seed).data)
}

fn eval_rays(cfg: &ExperimentConfig, objectives: usize) -> Result<Vec<PreferenceVector>, CliError> {
    Ok(test_rays(objectives, cfg.eval_ray_count(objectives))?)
}

/// Oracle hypervolume for toy problems; `None` for tabular data or when the
/// reference point is outside what the oracle supports.
pub fn toy_oracle(problem: &Problem, reference: &[f64]) -> Option<f64> {
    let Problem::Toy(toy) = problem else {
        return None;
    };
    match oracle_hv(problem, reference, default_oracle_resolution(*toy)) {
        Ok(v) => Some(v),
        Err(e) => {
            warn!("no oracle hypervolume: {e}");
            None
        }
    }
}

/// Writes `bytes` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| CliError::Io(format!("{}: {e}", tmp.display())))?;
    fs::rename(&tmp, path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(())
}

fn save_checkpoint(dir: &Path, hn: &Hypernetwork, seed: u64, iteration: u64) -> Result<(), CliError> {
    let text = Checkpoint::new(hn, seed, iteration).to_json_string()?;
    write_atomic(&dir.join(CHECKPOINT_FILE), text.as_bytes())
}

/// Writes `report.json` and `front.csv` into `dir`.
pub fn write_report(dir: &Path, report: &EvalReport) -> Result<(), CliError> {
    write_atomic(&dir.join(REPORT_FILE), report.to_json_string()?.as_bytes())?;
    let mut csv = Vec::new();
    report.write_front_csv(&mut csv)?;
    write_atomic(&dir.join(FRONT_FILE), &csv)
}

#[derive(Serialize)]
struct MetricsLine<'a> {
    schema_version: u32,
    phase: &'a str,
    iteration: u64,
    lr: f64,
    hv: f64,
    mean_cosine: f64,
    grad_norm: f64,
    hv_grad_norm: f64,
    cosine_grad_norm: f64,
    reference: &'a [f64],
    losses: &'a [Vec<f64>],
    #[serde(skip_serializing_if = "Option::is_none")]
    probe_hv: Option<f64>,
}

struct Metrics {
    out: BufWriter<File>,
}

impl Metrics {
    fn create(path: &Path) -> Result<Self, CliError> {
        let file = File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(Self { out: BufWriter::new(file) })
    }

    fn write(&mut self, phase: &str, r: &StepReport, lr: f64, probe_hv: Option<f64>) -> Result<(), CliError> {
        let line = MetricsLine {
            schema_version: METRICS_SCHEMA_VERSION,
            phase,
            iteration: r.iteration,
            lr,
            hv: r.hv,
            mean_cosine: r.mean_cosine,
            grad_norm: r.grad_norm,
            hv_grad_norm: r.hv_grad_norm,
            cosine_grad_norm: r.cosine_grad_norm,
            reference: &r.reference,
            losses: &r.losses,
            probe_hv,
        };
        let text = serde_json::to_string(&line).map_err(|e| CliError::Io(e.to_string()))?;
        writeln!(self.out, "{text}")?;
        Ok(())
    }

    fn flush(&mut self) -> Result<(), CliError> {
        Ok(self.out.flush()?)
    }
}

/// Hands out minibatches of the training split, reshuffling every epoch.
struct BatchPlan {
    order: Vec<usize>,
    cursor: usize,
    size: usize,
}

impl BatchPlan {
    fn new(rows: usize, size: usize) -> Self {
        Self {
            order: (0..rows).collect(),
            cursor: rows,
            size: size.min(rows).max(1),
        }
    }

    fn epoch_len(&self) -> u64 {
        self.order.len().div_ceil(self.size) as u64
    }

    fn next_rows(&mut self, rng: &mut Rng) -> Vec<usize> {
        if self.cursor >= self.order.len() {
            self.order.sort_unstable();
            rng.shuffle(&mut self.order);
            self.cursor = 0;
        }
        let end = (self.cursor + self.size).min(self.order.len());
        let rows = self.order[self.cursor..end].to_vec();
        self.cursor = end;
        rows
    }
}

/// Summary of a finished training run.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub report: EvalReport,
    pub iterations: u64,
    pub stopped_early: bool,
}

/// Trains per `cfg` and writes the run directory: `config.toml`,
/// `metrics.jsonl`, `checkpoint.json`, `report.json` and `front.csv`.
///
/// On a non-finite loss or gradient the run aborts; the checkpoint then holds
/// the parameters from before the failing step.
pub fn run_train(cfg: &ExperimentConfig) -> Result<RunOutcome, CliError> {
    cfg.validate()?;
    let mut streams = Streams::new(cfg.seed);
    let problem = build_problem_with(cfg, &mut streams.data)?;
    let j = problem.objectives();
    let train_cfg = cfg.train_config(j);
    train_cfg
        .validate(j)
        .map_err(|e| CliError::Config(format!("train: {e}")))?;
    let reference = train_cfg.ref_point.clone();
    let rays = eval_rays(cfg, j)?;

    let out_dir = cfg.resolved_out_dir();
    fs::create_dir_all(&out_dir).map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;
    let mut snapshot = cfg.clone();
    snapshot.out_dir = Some(out_dir.clone());
    write_atomic(&out_dir.join(CONFIG_FILE), snapshot.to_toml_string()?.as_bytes())?;

    let hn = init_hypernet(problem.target_spec(), j, &cfg.hypernet_shape(), &mut streams.init)?;
    let mut trainer = Trainer::new(hn, train_cfg, streams.train)?;
    let mut metrics = Metrics::create(&out_dir.join(METRICS_FILE))?;

    let tabular = problem.tabular().cloned();
    let mut plan = tabular
        .as_ref()
        .map(|tp| BatchPlan::new(tp.dataset.train.len(), cfg.data.batch_size));
    let mut batch_rng = streams.batches;
    let epoch_len = plan
        .as_ref()
        .map_or(cfg.schedule.toy_epoch_iterations, BatchPlan::epoch_len);
    let plateau = cfg.plateau_enabled();
    let probing = plateau || tabular.is_some();
    let val_split: Option<&Split> = tabular.as_ref().map(|tp| &tp.dataset.val);

    info!(
        "training {} with {:?}: {} iterations, {} warm-up steps, epoch {} iterations",
        problem.name(),
        cfg.train.solver,
        cfg.train.iterations,
        cfg.train.warmup_steps,
        epoch_len
    );

    let fail = |trainer: &Trainer, metrics: &mut Metrics, e: pfl_core::Error| -> CliError {
        let _ = metrics.flush();
        if let Err(save) = save_checkpoint(&out_dir, &trainer.hn, cfg.seed, trainer.iteration) {
            warn!("could not save last good checkpoint: {save}");
        }
        CliError::from(e)
    };

    let mut last = None;
    for _ in 0..cfg.train.warmup_steps {
        let rows = plan.as_mut().map(|p| p.next_rows(&mut batch_rng));
        let batch = batch_for(tabular.as_ref(), rows);
        match trainer.warmup_step(&problem, batch.as_ref()) {
            Ok(r) => last = Some(r),
            Err(e) => return Err(fail(&trainer, &mut metrics, e)),
        }
    }
    if let Some(r) = &last {
        metrics.write("warmup", r, trainer.adam.lr, None)?;
    }

    let mut best: Option<(f64, Hypernetwork, u64)> = None;
    let mut since_best = 0u64;
    let mut stopped_early = false;
    for it in 1..=cfg.train.iterations {
        let rows = plan.as_mut().map(|p| p.next_rows(&mut batch_rng));
        let batch = batch_for(tabular.as_ref(), rows);
        let report = match trainer.step(&problem, batch.as_ref()) {
            Ok(r) => r,
            Err(e) => return Err(fail(&trainer, &mut metrics, e)),
        };

        let mut probe_hv = None;
        if probing && it % epoch_len == 0 {
            let score = evaluate(&trainer.hn, &problem, &rays, &reference, val_split)
                .map_err(|e| fail(&trainer, &mut metrics, e))?
                .hv;
            probe_hv = Some(score);
            if best.as_ref().is_none_or(|(b, _, _)| score > *b) {
                best = Some((score, trainer.hn.clone(), it));
                since_best = 0;
            } else {
                since_best += 1;
                if plateau && since_best.is_multiple_of(cfg.schedule.patience) {
                    trainer.adam.lr *= cfg.schedule.lr_factor;
                    info!("epoch {}: plateau, lr now {:e}", it / epoch_len, trainer.adam.lr);
                }
                if plateau && since_best >= cfg.schedule.early_stop_patience {
                    stopped_early = true;
                }
            }
        }
        if it % cfg.log_every == 0 || it == cfg.train.iterations || probe_hv.is_some() || stopped_early {
            metrics.write("train", &report, trainer.adam.lr, probe_hv)?;
        }
        if it % cfg.checkpoint_every == 0 {
            save_checkpoint(&out_dir, &trainer.hn, cfg.seed, it)?;
        }
        if stopped_early {
            info!("early stop at iteration {it}");
            break;
        }
    }
    metrics.flush()?;

    // model selection by validation score where a validation split exists
    let (final_hn, final_iter) = match (tabular.is_some(), best) {
        (true, Some((_, hn, it))) => (hn, it),
        _ => (trainer.hn.clone(), trainer.iteration),
    };
    save_checkpoint(&out_dir, &final_hn, cfg.seed, final_iter)?;
    let mut report = evaluate(&final_hn, &problem, &rays, &reference, None)?;
    if let Some(oracle) = toy_oracle(&problem, &reference) {
        report = report.with_oracle(oracle);
    }
    write_report(&out_dir, &report)?;
    info!(
        "done: hv {:.6}{}",
        report.hv,
        report.hv_ratio.map_or(String::new(), |r| format!(", hv_ratio {r:.5}"))
    );
    Ok(RunOutcome {
        out_dir,
        report,
        iterations: trainer.iteration,
        stopped_early,
    })
}

fn batch_for(tabular: Option<&TabularProblem>, rows: Option<Vec<usize>>) -> Option<Batch<'_>> {
    match (tabular, rows) {
        (Some(tp), Some(rows)) => Some(tp.dataset.train.batch(rows)),
        _ => None,
    }
}

/// Inputs of an evaluation run.
#[derive(Clone, Debug)]
pub struct EvalRequest {
    pub config: ExperimentConfig,
    pub checkpoint: PathBuf,
    pub rays: Option<usize>,
    pub ref_point: Option<Vec<f64>>,
    pub out_dir: PathBuf,
}

/// Re-evaluates a checkpoint and writes `report.json` and `front.csv` to
/// `out_dir`. Nothing is written unless every input checks out.
pub fn run_eval(req: &EvalRequest) -> Result<EvalReport, CliError> {
    let text = fs::read_to_string(&req.checkpoint)
        .map_err(|e| CliError::Io(format!("{}: {e}", req.checkpoint.display())))?;
    let hn = Checkpoint::from_json_str(&text)?.to_hypernet()?;
    let cfg = &req.config;
    cfg.validate()?;
    let problem = build_problem(cfg)?;
    let j = problem.objectives();
    if hn.target != problem.target_spec() || hn.objectives() != j {
        return Err(CliError::Config(format!(
            "checkpoint {} does not match problem {}",
            req.checkpoint.display(),
            problem.name()
        )));
    }
    let reference = req.ref_point.clone().unwrap_or_else(|| cfg.ref_point(j));
    if reference.len() != j {
        return Err(CliError::Config(format!(
            "ref: expected {j} values, got {}",
            reference.len()
        )));
    }
    let rays = test_rays(j, req.rays.unwrap_or_else(|| cfg.eval_ray_count(j)))?;
    let mut report = evaluate(&hn, &problem, &rays, &reference, None)?;
    if let Some(oracle) = toy_oracle(&problem, &reference) {
        report = report.with_oracle(oracle);
    }
    fs::create_dir_all(&req.out_dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", req.out_dir.display())))?;
    write_report(&req.out_dir, &report)?;
    Ok(report)
}
