//! One training run per value of a single config field, each in its own
//! directory under the base run's output directory.

use std::path::PathBuf;
use std::sync::Mutex;

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::run::{run_train, write_atomic};

pub const SWEEP_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub field: String,
    pub values: Vec<String>,
}

impl Axis {
    /// Parses `field=v1,v2,...`.
    pub fn parse(spec: &str) -> Result<Self, CliError> {
        let (field, values) = spec
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("axis `{spec}`: expected field=v1,v2,...")))?;
        let field = field.trim().to_string();
        if !matches!(field.as_str(), "rays" | "lambda" | "lr" | "partition" | "seed" | "solver") {
            return Err(CliError::Config(format!("axis: cannot sweep over `{field}`")));
        }
        let values: Vec<String> = values
            .split(',')
            .map(|v| v.trim().to_string())
            .filter(|v| !v.is_empty())
            .collect();
        if values.is_empty() {
            return Err(CliError::Config(format!("axis `{field}` has no values")));
        }
        let axis = Self { field, values };
        // reject bad values before any run starts
        for v in &axis.values {
            axis.apply(&ExperimentConfig::default(), v)?;
        }
        Ok(axis)
    }

    /// `base` with the axis field set to `value`.
    pub fn apply(&self, base: &ExperimentConfig, value: &str) -> Result<ExperimentConfig, CliError> {
        let bad = || CliError::Config(format!("axis {}: invalid value `{value}`", self.field));
        let mut cfg = base.clone();
        match self.field.as_str() {
            "rays" => cfg.train.rays = value.parse().map_err(|_| bad())?,
            "lambda" => cfg.train.lambda = value.parse().map_err(|_| bad())?,
            "lr" => cfg.train.lr = value.parse().map_err(|_| bad())?,
            "partition" => cfg.train.partition = value.parse().map_err(|_| bad())?,
            "seed" => cfg.seed = value.parse().map_err(|_| bad())?,
            "solver" => cfg.train.solver = value.parse().map_err(|_| bad())?,
            _ => return Err(bad()),
        }
        Ok(cfg)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRun {
    pub value: String,
    pub dir: PathBuf,
    pub hv: f64,
    pub hv_ratio: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepSummary {
    pub schema_version: u32,
    pub field: String,
    pub runs: Vec<SweepRun>,
}

/// Runs every axis value, `jobs` at a time, then writes `sweep.json` under
/// the base output directory. The first failing run's error is returned.
pub fn run_sweep(base: &ExperimentConfig, axis: &Axis, jobs: usize) -> Result<SweepSummary, CliError> {
    let root = base.resolved_out_dir();
    let configs = axis
        .values
        .iter()
        .map(|v| {
            let mut cfg = axis.apply(base, v)?;
            cfg.out_dir = Some(root.join(format!("{}-{v}", axis.field)));
            cfg.validate()?;
            Ok(cfg)
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let results: Vec<Mutex<Option<Result<SweepRun, CliError>>>> =
        configs.iter().map(|_| Mutex::new(None)).collect();
    let next = Mutex::new(0usize);
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, configs.len()) {
            scope.spawn(|| loop {
                let i = {
                    let mut n = next.lock().unwrap_or_else(|e| e.into_inner());
                    let i = *n;
                    *n += 1;
                    i
                };
                let Some(cfg) = configs.get(i) else { break };
                let outcome = run_train(cfg).map(|o| SweepRun {
                    value: axis.values[i].clone(),
                    dir: o.out_dir,
                    hv: o.report.hv,
                    hv_ratio: o.report.hv_ratio,
                });
                *results[i].lock().unwrap_or_else(|e| e.into_inner()) = Some(outcome);
            });
        }
    });

    let mut runs = Vec::with_capacity(results.len());
    for slot in results {
        let result = slot
            .into_inner()
            .unwrap_or_else(|e| e.into_inner())
            .expect("every sweep slot is filled");
        runs.push(result?);
    }
    let summary = SweepSummary {
        schema_version: SWEEP_SCHEMA_VERSION,
        field: axis.field.clone(),
        runs,
    };
    let text = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Io(e.to_string()))?;
    std::fs::create_dir_all(&root)?;
    write_atomic(&root.join("sweep.json"), text.as_bytes())?;
    Ok(summary)
}
