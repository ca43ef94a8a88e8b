//! Experiment configuration: one TOML file, every field defaulted, unknown
//! keys rejected. Command-line flags are applied on top.

use std::path::{Path, PathBuf};

use pfl_core::network::HypernetShape;
use pfl_core::problems::{SplitRatios, TargetScaling};
use pfl_core::solver::{Bandwidth, SolverKind, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// Environment variable naming the directory runs go under when no output
/// directory is configured.
pub const OUT_ROOT_ENV: &str = "PFL_OUT_ROOT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    /// `p1`..`p4` or `tabular`.
    pub problem: String,
    pub seed: u64,
    /// Evaluation ray count hint; `None` uses 200 for two objectives and the
    /// 231-point lattice otherwise.
    pub eval_rays: Option<usize>,
    pub out_dir: Option<PathBuf>,
    /// Iterations between checkpoint writes.
    pub checkpoint_every: u64,
    /// Iterations between metrics lines.
    pub log_every: u64,
    pub train: TrainSection,
    pub hypernet: HypernetSection,
    pub schedule: ScheduleSection,
    pub data: DataSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            problem: "p1".into(),
            seed: 42,
            eval_rays: None,
            out_dir: None,
            checkpoint_every: 1000,
            log_every: 10,
            train: TrainSection::default(),
            hypernet: HypernetSection::default(),
            schedule: ScheduleSection::default(),
            data: DataSection::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub solver: SolverKind,
    pub rays: usize,
    pub lambda: f64,
    pub alpha: Option<Vec<f64>>,
    /// `None`: 2 per objective for toy problems, 1 per objective for tabular.
    pub ref_point: Option<Vec<f64>>,
    pub gamma: f64,
    pub lr: f64,
    pub iterations: u64,
    pub warmup_steps: u64,
    pub partition: bool,
    pub sigma: Bandwidth,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            solver: t.solver,
            rays: t.rays,
            lambda: t.lambda,
            alpha: t.alpha,
            ref_point: None,
            gamma: t.gamma,
            lr: t.lr,
            iterations: t.iterations,
            warmup_steps: t.warmup_steps,
            partition: t.partition,
            sigma: t.sigma,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HypernetSection {
    pub hidden_dims: Vec<usize>,
    pub dropout: f64,
}

impl Default for HypernetSection {
    fn default() -> Self {
        let s = HypernetShape::default();
        Self {
            hidden_dims: s.hidden_dims,
            dropout: s.dropout_rate,
        }
    }
}

/// Learning-rate decay on plateau and early stopping, counted in epochs.
///
/// A probe runs at the end of every epoch and scores the model on the
/// validation split (tabular) or the evaluation rays (toys).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSection {
    /// `None`: on for tabular problems, off for toys.
    pub plateau: Option<bool>,
    pub patience: u64,
    pub lr_factor: f64,
    pub early_stop_patience: u64,
    /// Epoch length for toy problems.
    pub toy_epoch_iterations: u64,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        Self {
            plateau: None,
            patience: 10,
            lr_factor: std::f64::consts::FRAC_1_SQRT_2,
            early_stop_patience: 35,
            toy_epoch_iterations: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// CSV file; when absent a synthetic dataset is generated from `seed`.
    pub path: Option<PathBuf>,
    /// Target column names; empty selects every column whose name starts with `y`.
    pub targets: Vec<String>,
    pub split: [f64; 3],
    pub scaling: TargetScaling,
    pub batch_size: usize,
    pub target_hidden: Vec<usize>,
    pub synthetic_rows: usize,
    pub synthetic_features: usize,
    pub synthetic_tasks: usize,
    pub synthetic_noise: f64,
}

impl Default for DataSection {
    fn default() -> Self {
        let r = SplitRatios::default();
        Self {
            path: None,
            targets: Vec::new(),
            split: [r.train, r.val, r.test],
            scaling: TargetScaling::Max,
            batch_size: 64,
            target_hidden: vec![32],
            synthetic_rows: 1000,
            synthetic_features: 8,
            synthetic_tasks: 4,
            synthetic_noise: 0.1,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig =
            toml::from_str(s).map_err(|e| CliError::Config(e.to_string()))?;
        if cfg.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "schema_version: expected {CONFIG_SCHEMA_VERSION}, found {}",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn is_tabular(&self) -> bool {
        self.problem == "tabular"
    }

    pub fn plateau_enabled(&self) -> bool {
        self.schedule.plateau.unwrap_or(self.is_tabular())
    }

    /// Output directory: configured, else `$PFL_OUT_ROOT/<problem>-<solver>-s<seed>`
    /// (with `runs` as the root when the variable is unset).
    pub fn resolved_out_dir(&self) -> PathBuf {
        if let Some(dir) = &self.out_dir {
            return dir.clone();
        }
        let root = std::env::var_os(OUT_ROOT_ENV).map_or_else(|| PathBuf::from("runs"), PathBuf::from);
        let solver = serde_json::to_value(self.train.solver)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default();
        root.join(format!("{}-{}-s{}", self.problem, solver, self.seed))
    }

    pub fn ref_point(&self, objectives: usize) -> Vec<f64> {
        self.train.ref_point.clone().unwrap_or_else(|| {
            let v = if self.is_tabular() { 1.0 } else { 2.0 };
            vec![v; objectives]
        })
    }

    pub fn eval_ray_count(&self, objectives: usize) -> usize {
        self.eval_rays.unwrap_or(if objectives == 2 { 200 } else { 231 })
    }

    pub fn train_config(&self, objectives: usize) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            solver: t.solver,
            rays: t.rays,
            lambda: t.lambda,
            alpha: t.alpha.clone(),
            ref_point: self.ref_point(objectives),
            gamma: t.gamma,
            lr: t.lr,
            iterations: t.iterations,
            warmup_steps: t.warmup_steps,
            partition: t.partition,
            sigma: t.sigma,
        }
    }

    pub fn hypernet_shape(&self) -> HypernetShape {
        HypernetShape {
            hidden_dims: self.hypernet.hidden_dims.clone(),
            dropout_rate: self.hypernet.dropout,
        }
    }

    pub fn split_ratios(&self) -> SplitRatios {
        let [train, val, test] = self.data.split;
        SplitRatios { train, val, test }
    }

    /// Field-level checks that do not need the problem to be built.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |field: &str, msg: String| Err(CliError::Config(format!("{field}: {msg}")));
        if !matches!(self.problem.as_str(), "p1" | "p2" | "p3" | "p4" | "tabular") {
            return bad("problem", format!("unknown problem `{}`", self.problem));
        }
        if self.checkpoint_every == 0 {
            return bad("checkpoint_every", "must be >= 1".into());
        }
        if self.log_every == 0 {
            return bad("log_every", "must be >= 1".into());
        }
        if self.eval_rays == Some(0) {
            return bad("eval_rays", "must be >= 1".into());
        }
        if self.hypernet.hidden_dims.contains(&0) {
            return bad("hypernet.hidden_dims", "widths must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.hypernet.dropout) {
            return bad("hypernet.dropout", format!("{} is outside [0, 1)", self.hypernet.dropout));
        }
        let s = &self.schedule;
        if !(s.lr_factor > 0.0 && s.lr_factor.is_finite()) {
            return bad("schedule.lr_factor", format!("{} must be > 0", s.lr_factor));
        }
        if s.patience == 0 || s.early_stop_patience == 0 || s.toy_epoch_iterations == 0 {
            return bad("schedule", "patience values and toy_epoch_iterations must be >= 1".into());
        }
        if self.is_tabular() {
            let d = &self.data;
            if d.batch_size == 0 {
                return bad("data.batch_size", "must be >= 1".into());
            }
            if d.path.is_none() && (d.synthetic_tasks < 2 || d.synthetic_features == 0) {
                return bad("data", "synthetic data needs >= 2 tasks and >= 1 feature".into());
            }
        }
        Ok(())
    }
}
