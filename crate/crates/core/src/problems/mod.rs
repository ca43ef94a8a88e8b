//! Objective suites: analytic toy problems with oracle fronts and tabular
//! multi-output regression.

mod tabular;
mod toy;

use std::sync::Arc;

pub use tabular::{
    load_tabular, synthetic_regression, Batch, Split, SplitRatios, TabularDataset, Table,
    TargetScaling,
};
pub use toy::Toy;

use crate::error::{Error, Result};
use crate::hypervolume::FrontSet;
use crate::network::{Squash, TargetSpec};
use crate::numerics::{mlp_backward_accumulate, mlp_forward, Activation, MlpSpec, Rng};

/// Loss vector `L` and Jacobian `dL/dtheta` (`J` rows).
#[derive(Clone, Debug, PartialEq)]
pub struct Losses {
    pub values: Vec<f64>,
    pub jacobian: Vec<Vec<f64>>,
}

impl Losses {
    /// `sum_j weights[j] * dL_j/dtheta`
    pub fn pullback(&self, weights: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.jacobian.first().map_or(0, Vec::len)];
        for (w, row) in weights.iter().zip(&self.jacobian) {
            crate::numerics::axpy(*w, row, &mut out);
        }
        out
    }
}

/// Regression with a target MLP whose weights come from the hypernetwork.
#[derive(Clone, Debug)]
pub struct TabularProblem {
    pub dataset: Arc<TabularDataset>,
    pub target: MlpSpec,
}

impl TabularProblem {
    pub fn new(dataset: Arc<TabularDataset>, hidden_dims: Vec<usize>) -> Result<Self> {
        let target = MlpSpec::new(
            dataset.num_features(),
            hidden_dims,
            dataset.num_targets(),
            Activation::Relu,
            Activation::Linear,
        );
        target.validate()?;
        if dataset.num_targets() < 2 {
            return Err(Error::Data("tabular problems need at least 2 targets".into()));
        }
        Ok(Self { dataset, target })
    }
}

#[derive(Clone, Debug)]
pub enum Problem {
    Toy(Toy),
    Tabular(TabularProblem),
}

impl Problem {
    /// Looks up a toy problem by name: `p1`..`p4` (`p2` uses `d = 100`).
    pub fn toy_by_name(name: &str) -> Result<Self> {
        let toy = match name {
            "p1" => Toy::Convex,
            "p2" => Toy::Concave { dim: 100 },
            "p3" => Toy::Disconnected,
            "p4" => Toy::Sphere,
            other => {
                return Err(Error::InvalidArgument(format!("unknown toy problem `{other}`")))
            }
        };
        Ok(Problem::Toy(toy))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Problem::Toy(Toy::Convex) => "p1",
            Problem::Toy(Toy::Concave { .. }) => "p2",
            Problem::Toy(Toy::Disconnected) => "p3",
            Problem::Toy(Toy::Sphere) => "p4",
            Problem::Tabular(_) => "tabular",
        }
    }

    pub fn objectives(&self) -> usize {
        match self {
            Problem::Toy(t) => t.objectives(),
            Problem::Tabular(t) => t.dataset.num_targets(),
        }
    }

    pub fn theta_dim(&self) -> usize {
        match self {
            Problem::Toy(t) => t.theta_dim(),
            Problem::Tabular(t) => t.target.param_count(),
        }
    }

    pub fn box_constrained(&self) -> bool {
        matches!(self, Problem::Toy(t) if t.box_constrained())
    }

    pub fn batch_based(&self) -> bool {
        matches!(self, Problem::Tabular(_))
    }

    /// Target the hypernetwork has to emit for this problem.
    pub fn target_spec(&self) -> TargetSpec {
        match self {
            Problem::Toy(t) => TargetSpec::RawVector {
                dim: t.theta_dim(),
                squash: if t.box_constrained() { Squash::Sigmoid } else { Squash::None },
            },
            Problem::Tabular(t) => TargetSpec::Mlp { spec: t.target.clone() },
        }
    }

    pub fn tabular(&self) -> Option<&TabularProblem> {
        match self {
            Problem::Tabular(t) => Some(t),
            Problem::Toy(_) => None,
        }
    }
}

/// Loss vector and Jacobian at `theta`. Tabular problems need a batch and
/// report per-task mean squared error over it.
pub fn eval_losses(problem: &Problem, theta: &[f64], batch: Option<&Batch<'_>>) -> Result<Losses> {
    match problem {
        Problem::Toy(t) => {
            let (values, jacobian) = t.eval(theta)?;
            Ok(Losses { values, jacobian })
        }
        Problem::Tabular(tp) => {
            let batch = batch.ok_or_else(|| {
                Error::InvalidArgument("tabular losses need a data batch".into())
            })?;
            tabular_losses(tp, theta, batch)
        }
    }
}

fn tabular_losses(tp: &TabularProblem, theta: &[f64], batch: &Batch<'_>) -> Result<Losses> {
    let spec = &tp.target;
    if theta.len() != spec.param_count() {
        return Err(Error::dims("target weights", spec.param_count(), theta.len()));
    }
    if batch.rows.is_empty() {
        return Err(Error::Data("empty batch".into()));
    }
    let tasks = spec.output_dim;
    let scale = 1.0 / batch.rows.len() as f64;
    let mut values = vec![0.0; tasks];
    let mut jacobian = vec![vec![0.0; theta.len()]; tasks];
    // the target network has no dropout, so the rng is never drawn from
    let mut rng = Rng::new(0);
    for &row in &batch.rows {
        let x = &batch.split.features[row];
        let y = &batch.split.targets[row];
        let (pred, tape) = mlp_forward(spec, theta, x, &mut rng, false)?;
        for j in 0..tasks {
            let err = pred[j] - y[j];
            values[j] += scale * err * err;
            let mut g = vec![0.0; tasks];
            g[j] = 2.0 * scale * err;
            mlp_backward_accumulate(&tape, &g, &mut jacobian[j])?;
        }
    }
    Ok(Losses { values, jacobian })
}

/// Default sample count for one-parameter fronts.
pub const ORACLE_RESOLUTION_1D: usize = 10_000;
/// Default grid side for the two-parameter sphere front.
pub const ORACLE_RESOLUTION_GRID: usize = 100;

/// Default resolution of [`oracle_front`] for a toy problem.
pub fn default_oracle_resolution(toy: Toy) -> usize {
    match toy {
        Toy::Convex | Toy::Concave { .. } | Toy::Disconnected => ORACLE_RESOLUTION_1D,
        Toy::Sphere => ORACLE_RESOLUTION_GRID,
    }
}

/// Dense nondominated sampling of the true Pareto front.
pub fn oracle_front(problem: &Problem, resolution: usize, reference: &[f64]) -> Result<FrontSet> {
    let toy = match problem {
        Problem::Toy(t) => *t,
        Problem::Tabular(_) => {
            return Err(Error::Unsupported {
                problem: problem.name().into(),
                what: "no analytic Pareto front".into(),
            })
        }
    };
    let points = toy
        .pareto_set_samples(resolution)
        .iter()
        .map(|theta| toy.eval(theta).map(|(l, _)| l))
        .collect::<Result<Vec<_>>>()?;
    let mask = crate::hypervolume::filter_nondominated(&points)?;
    let mut front: Vec<Vec<f64>> = points
        .into_iter()
        .zip(mask)
        .filter(|(_, keep)| *keep)
        .map(|(p, _)| p)
        .collect();
    front.sort_by(|a, b| a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
    front.dedup();
    FrontSet::new(front, reference.to_vec())
}
