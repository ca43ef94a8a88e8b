//! Training steps for the hypernetwork: hypervolume ascent with cosine
//! alignment, its warm-up, linear-scalarization and COSMOS baselines, and the
//! Stein-variational variant.
//!
//! Every step evaluates its rays in a fixed order and accumulates the
//! parameter gradient in that order, so runs are bitwise reproducible.

mod min_norm;
mod stein;

pub use min_norm::{min_norm_convex_hull, FW_GAP_TOLERANCE};
pub use stein::{kernel, kernel_gradient, median_bandwidth};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypervolume::{hv, hv_gradient};
use crate::network::{Hypernetwork, TargetTape};
use crate::numerics::{dot, norm, sample_dirichlet, AdamState, Rng};
use crate::preference::{partition_sample_2d, PreferenceVector};
use crate::problems::{eval_losses, Batch, Losses, Problem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    PhnHvi,
    PhnLs,
    Cosmos,
    Stein,
}

impl SolverKind {
    pub fn uses_hypervolume(self) -> bool {
        matches!(self, SolverKind::PhnHvi | SolverKind::Stein)
    }

    /// Dirichlet concentration used when none is configured.
    pub fn default_alpha(self, objectives: usize) -> Vec<f64> {
        match self {
            SolverKind::PhnHvi | SolverKind::Stein => vec![1.0 / objectives as f64; objectives],
            SolverKind::PhnLs => vec![0.2; objectives],
            SolverKind::Cosmos => vec![1.2; objectives],
        }
    }
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "phn-hvi" => Ok(SolverKind::PhnHvi),
            "phn-ls" => Ok(SolverKind::PhnLs),
            "cosmos" => Ok(SolverKind::Cosmos),
            "stein" => Ok(SolverKind::Stein),
            other => Err(Error::InvalidArgument(format!("unknown solver `{other}`"))),
        }
    }
}

/// Kernel bandwidth for the Stein step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    Median,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub solver: SolverKind,
    /// Rays per step for the multi-sample solvers.
    pub rays: usize,
    pub lambda: f64,
    /// Dirichlet concentration; `None` picks the solver default.
    pub alpha: Option<Vec<f64>>,
    pub ref_point: Vec<f64>,
    pub gamma: f64,
    pub lr: f64,
    pub iterations: u64,
    pub warmup_steps: u64,
    /// Angular partition sampling for two objectives.
    pub partition: bool,
    pub sigma: Bandwidth,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            solver: SolverKind::PhnHvi,
            rays: 4,
            lambda: 1.0,
            alpha: None,
            ref_point: vec![2.0, 2.0],
            gamma: 1.1,
            lr: 1e-3,
            iterations: 10_000,
            warmup_steps: 500,
            partition: true,
            sigma: Bandwidth::Median,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, objectives: usize) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidArgument(msg));
        if self.ref_point.len() != objectives {
            return Err(Error::dims("ref_point", objectives, self.ref_point.len()));
        }
        if self.ref_point.iter().any(|v| !v.is_finite()) {
            return fail("ref_point must be finite".into());
        }
        if self.solver.uses_hypervolume() && self.rays < 2 {
            return fail(format!("{:?} needs at least 2 rays, got {}", self.solver, self.rays));
        }
        if self.rays < 1 {
            return fail("rays must be >= 1".into());
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return fail(format!("lambda {} must be >= 0", self.lambda));
        }
        if self.gamma.is_nan() || self.gamma <= 0.0 {
            return fail(format!("gamma {} must be > 0", self.gamma));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return fail(format!("lr {} must be > 0", self.lr));
        }
        if let Some(alpha) = &self.alpha {
            if alpha.len() != objectives {
                return Err(Error::dims("alpha", objectives, alpha.len()));
            }
            if alpha.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
                return fail("alpha entries must be > 0".into());
            }
        }
        if let Bandwidth::Fixed(s) = self.sigma {
            if !(s > 0.0 && s.is_finite()) {
                return fail(format!("sigma {s} must be > 0"));
            }
        }
        Ok(())
    }

    pub fn alpha_for(&self, objectives: usize) -> Vec<f64> {
        self.alpha
            .clone()
            .unwrap_or_else(|| self.solver.default_alpha(objectives))
    }
}

/// Telemetry of one optimization step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub iteration: u64,
    pub rays: Vec<Vec<f64>>,
    pub losses: Vec<Vec<f64>>,
    pub hv: f64,
    pub mean_cosine: f64,
    /// Norm of the full parameter-space update direction.
    pub grad_norm: f64,
    /// Loss-space norms of the hypervolume and cosine terms.
    pub hv_grad_norm: f64,
    pub cosine_grad_norm: f64,
    pub reference: Vec<f64>,
}

/// Reference point for one step: the configured point when every loss vector
/// strictly dominates it, otherwise `gamma` times the coordinatewise maximum
/// of the current losses.
pub fn effective_ref_point(losses: &[Vec<f64>], reference: &[f64], gamma: f64) -> Vec<f64> {
    let all_inside = losses
        .iter()
        .all(|l| l.iter().zip(reference).all(|(a, r)| a < r));
    if all_inside {
        return reference.to_vec();
    }
    (0..reference.len())
        .map(|j| gamma * losses.iter().map(|l| l[j]).fold(f64::NEG_INFINITY, f64::max))
        .collect()
}

pub fn cosine(r: &[f64], l: &[f64]) -> f64 {
    dot(r, l) / (norm(r) * norm(l))
}

/// Gradient of `cos(r, L)` with respect to `L`.
pub fn cosine_alignment_grad(r: &[f64], l: &[f64]) -> Result<Vec<f64>> {
    if r.len() != l.len() {
        return Err(Error::dims("cosine alignment", r.len(), l.len()));
    }
    let nl = norm(l);
    if nl <= 1e-12 {
        return Err(Error::Degenerate(format!("loss vector norm {nl} is too small for cosine")));
    }
    let nr = norm(r);
    let rl = dot(r, l);
    Ok(r.iter()
        .zip(l)
        .map(|(ri, li)| ri / (nr * nl) - rl * li / (nr * nl * nl * nl))
        .collect())
}

/// Forward pass and loss evaluation for one ray.
pub struct RayEval<'a> {
    pub ray: PreferenceVector,
    pub tape: TargetTape<'a>,
    pub losses: Losses,
}

/// Generates targets and losses for each ray in order.
pub fn evaluate_rays<'a>(
    hn: &'a Hypernetwork,
    problem: &Problem,
    rays: Vec<PreferenceVector>,
    rng: &mut Rng,
    batch: Option<&Batch<'_>>,
    train_mode: bool,
) -> Result<Vec<RayEval<'a>>> {
    rays.into_iter()
        .enumerate()
        .map(|(i, ray)| {
            let (theta, tape) = hn.generate_target(&ray, rng, train_mode)?;
            let losses = eval_losses(problem, theta.as_slice(), batch)?;
            if losses.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteLoss {
                    ray: i,
                    losses: losses.values,
                });
            }
            Ok(RayEval { ray, tape, losses })
        })
        .collect()
}

/// Training rays: one per angular cell for two objectives when partitioning
/// is on, Dirichlet draws otherwise.
pub fn sample_rays(objectives: usize, count: usize, cfg: &TrainConfig, rng: &mut Rng) -> Result<Vec<PreferenceVector>> {
    if objectives == 2 && cfg.partition {
        return partition_sample_2d(count, rng);
    }
    let alpha = cfg.alpha_for(objectives);
    (0..count).map(|_| sample_dirichlet(&alpha, rng)).collect()
}

/// Parameter-space direction (to be minimized) and its telemetry.
pub struct Direction {
    pub grad: Vec<f64>,
    pub report: StepReport,
}

/// Which terms enter the multi-sample direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Terms {
    pub hypervolume: bool,
    pub cosine_weight: f64,
}

/// Direction minimizing `-HV(L) - w * sum_i cos(r_i, L_i)` over the evaluated
/// rays. Each ray's loss-space gradient is pulled back through its
/// Jacobian and its hypernetwork tape, accumulated in ray order.
pub fn multi_sample_direction(
    hn: &Hypernetwork,
    evals: &[RayEval<'_>],
    cfg: &TrainConfig,
    terms: Terms,
) -> Result<Direction> {
    let losses: Vec<Vec<f64>> = evals.iter().map(|e| e.losses.values.clone()).collect();
    let reference = effective_ref_point(&losses, &cfg.ref_point, cfg.gamma);
    let hv_value = hv(&losses, &reference)?;
    let hv_grad = if terms.hypervolume {
        hv_gradient(&losses, &reference)?
    } else {
        vec![vec![0.0; reference.len()]; losses.len()]
    };
    let mut grad = vec![0.0; hn.param_count()];
    let mut hv_sq = 0.0;
    let mut cos_sq = 0.0;
    let mut cos_sum = 0.0;
    for (eval, w) in evals.iter().zip(&hv_grad) {
        let l = &eval.losses.values;
        let r = eval.ray.weights();
        cos_sum += cosine(r, l);
        let mut loss_grad: Vec<f64> = w.iter().map(|x| -x).collect();
        hv_sq += dot(w, w);
        if terms.cosine_weight != 0.0 {
            let c = cosine_alignment_grad(r, l)?;
            for (g, ci) in loss_grad.iter_mut().zip(&c) {
                *g -= terms.cosine_weight * ci;
            }
            cos_sq += terms.cosine_weight * terms.cosine_weight * dot(&c, &c);
        }
        let dtheta = eval.losses.pullback(&loss_grad);
        hn.backprop_to_phi(&eval.tape, &dtheta, &mut grad)?;
    }
    let report = StepReport {
        iteration: 0,
        rays: evals.iter().map(|e| e.ray.weights().to_vec()).collect(),
        losses,
        hv: hv_value,
        mean_cosine: cos_sum / evals.len() as f64,
        grad_norm: norm(&grad),
        hv_grad_norm: hv_sq.sqrt(),
        cosine_grad_norm: cos_sq.sqrt(),
        reference,
    };
    Ok(Direction { grad, report })
}

/// Single-ray scalarized direction: minimizes `r . L - w * cos(r, L)`.
pub fn scalarized_direction(
    hn: &Hypernetwork,
    eval: &RayEval<'_>,
    cfg: &TrainConfig,
    cosine_weight: f64,
) -> Result<Direction> {
    let r = eval.ray.weights();
    let l = &eval.losses.values;
    let mut loss_grad = r.to_vec();
    let mut cos_norm = 0.0;
    if cosine_weight != 0.0 {
        let c = cosine_alignment_grad(r, l)?;
        for (g, ci) in loss_grad.iter_mut().zip(&c) {
            *g -= cosine_weight * ci;
        }
        cos_norm = cosine_weight * norm(&c);
    }
    let mut grad = vec![0.0; hn.param_count()];
    hn.backprop_to_phi(&eval.tape, &eval.losses.pullback(&loss_grad), &mut grad)?;
    let losses = vec![l.clone()];
    let reference = effective_ref_point(&losses, &cfg.ref_point, cfg.gamma);
    let report = StepReport {
        iteration: 0,
        rays: vec![r.to_vec()],
        hv: hv(&losses, &reference)?,
        losses,
        mean_cosine: cosine(r, l),
        grad_norm: norm(&grad),
        hv_grad_norm: 0.0,
        cosine_grad_norm: cos_norm,
        reference,
    };
    Ok(Direction { grad, report })
}

/// Hypernetwork, optimizer state and sampling stream of one training run.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub hn: Hypernetwork,
    pub adam: AdamState,
    pub cfg: TrainConfig,
    pub rng: Rng,
    pub iteration: u64,
}

impl Trainer {
    pub fn new(hn: Hypernetwork, cfg: TrainConfig, rng: Rng) -> Result<Self> {
        cfg.validate(hn.objectives())?;
        let adam = AdamState::new(hn.param_count(), cfg.lr);
        Ok(Self {
            hn,
            adam,
            cfg,
            rng,
            iteration: 0,
        })
    }

    fn apply(&mut self, direction: Direction) -> Result<StepReport> {
        self.adam.step(&mut self.hn.params.values, &direction.grad)?;
        self.iteration += 1;
        let mut report = direction.report;
        report.iteration = self.iteration;
        Ok(report)
    }

    /// One step of the configured solver.
    pub fn step(&mut self, problem: &Problem, batch: Option<&Batch<'_>>) -> Result<StepReport> {
        match self.cfg.solver {
            SolverKind::PhnHvi => self.phn_hvi_step(problem, batch),
            SolverKind::PhnLs => self.phn_ls_step(problem, batch),
            SolverKind::Cosmos => self.cosmos_step(problem, batch),
            SolverKind::Stein => self.stein_step(problem, batch),
        }
    }

    /// Hypervolume ascent plus `lambda`-weighted cosine alignment over `p`
    /// rays, followed by an Adam update.
    pub fn phn_hvi_step(&mut self, problem: &Problem, batch: Option<&Batch<'_>>) -> Result<StepReport> {
        let terms = Terms {
            hypervolume: true,
            cosine_weight: self.cfg.lambda,
        };
        let direction = self.multi_sample(problem, batch, terms)?;
        self.apply(direction)
    }

    /// Cosine alignment only. Does not advance the iteration counter.
    pub fn warmup_step(&mut self, problem: &Problem, batch: Option<&Batch<'_>>) -> Result<StepReport> {
        let terms = Terms {
            hypervolume: false,
            cosine_weight: 1.0,
        };
        let direction = self.multi_sample(problem, batch, terms)?;
        self.adam.step(&mut self.hn.params.values, &direction.grad)?;
        Ok(direction.report)
    }

    fn multi_sample(&mut self, problem: &Problem, batch: Option<&Batch<'_>>, terms: Terms) -> Result<Direction> {
        let rays = sample_rays(problem.objectives(), self.cfg.rays, &self.cfg, &mut self.rng)?;
        let evals = evaluate_rays(&self.hn, problem, rays, &mut self.rng, batch, true)?;
        multi_sample_direction(&self.hn, &evals, &self.cfg, terms)
    }

    fn single_ray(&mut self, problem: &Problem, batch: Option<&Batch<'_>>, cosine_weight: f64) -> Result<StepReport> {
        let j = problem.objectives();
        let ray = sample_dirichlet(&self.cfg.alpha_for(j), &mut self.rng)?;
        let evals = evaluate_rays(&self.hn, problem, vec![ray], &mut self.rng, batch, true)?;
        let direction = scalarized_direction(&self.hn, &evals[0], &self.cfg, cosine_weight)?;
        drop(evals);
        self.apply(direction)
    }

    /// Linear scalarization on one Dirichlet ray.
    pub fn phn_ls_step(&mut self, problem: &Problem, batch: Option<&Batch<'_>>) -> Result<StepReport> {
        self.single_ray(problem, batch, 0.0)
    }

    /// Linear scalarization with `lambda`-weighted cosine alignment.
    pub fn cosmos_step(&mut self, problem: &Problem, batch: Option<&Batch<'_>>) -> Result<StepReport> {
        let w = self.cfg.lambda;
        self.single_ray(problem, batch, w)
    }

    /// Stein-variational update over `p` rays.
    pub fn stein_step(&mut self, problem: &Problem, batch: Option<&Batch<'_>>) -> Result<StepReport> {
        let rays = sample_rays(problem.objectives(), self.cfg.rays, &self.cfg, &mut self.rng)?;
        let evals = evaluate_rays(&self.hn, problem, rays, &mut self.rng, batch, true)?;
        let direction = stein::stein_direction(&self.hn, &evals, &self.cfg)?;
        drop(evals);
        self.apply(direction)
    }
}
