use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Analytic benchmark problems with known Pareto fronts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Toy {
    /// `L = (t^2, (t - 1)^2)`, convex front.
    Convex,
    /// `L_j = 1 - exp(-|theta -+ 1/sqrt(d)|^2)`, concave front.
    Concave { dim: usize },
    /// Two objectives with a disconnected front.
    Disconnected,
    /// Three objectives on the unit sphere, `theta` in `[0, 1]^10`.
    Sphere,
}

pub(crate) const SPHERE_DIM: usize = 10;

impl Toy {
    pub fn objectives(&self) -> usize {
        match self {
            Toy::Sphere => 3,
            _ => 2,
        }
    }

    pub fn theta_dim(&self) -> usize {
        match self {
            Toy::Convex => 1,
            Toy::Concave { dim } => *dim,
            Toy::Disconnected => 2,
            Toy::Sphere => SPHERE_DIM,
        }
    }

    pub fn box_constrained(&self) -> bool {
        matches!(self, Toy::Sphere)
    }

    /// Loss vector and its `J x d` Jacobian.
    pub fn eval(&self, theta: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        if theta.len() != self.theta_dim() {
            return Err(Error::dims("theta", self.theta_dim(), theta.len()));
        }
        crate::error::ensure_finite("theta", theta)?;
        Ok(match self {
            Toy::Convex => convex(theta[0]),
            Toy::Concave { dim } => concave(theta, *dim),
            Toy::Disconnected => disconnected(theta[0], theta[1]),
            Toy::Sphere => {
                if let Some((index, &value)) =
                    theta.iter().enumerate().find(|(_, t)| !(0.0..=1.0).contains(*t))
                {
                    return Err(Error::OutOfDomain { index, value });
                }
                sphere(theta)
            }
        })
    }

    /// Decision vectors sampling the Pareto set. `resolution` is the number of
    /// points for one-parameter fronts and the grid side for the sphere.
    pub(crate) fn pareto_set_samples(&self, resolution: usize) -> Vec<Vec<f64>> {
        let n = resolution.max(2);
        let grid = |i: usize, lo: f64, hi: f64| lo + (hi - lo) * i as f64 / (n - 1) as f64;
        match self {
            Toy::Convex => (0..n).map(|i| vec![grid(i, 0.0, 1.0)]).collect(),
            Toy::Concave { dim } => {
                let s = 1.0 / (*dim as f64).sqrt();
                (0..n).map(|i| vec![grid(i, -1.0, 1.0) * s; *dim]).collect()
            }
            // L1 ignores theta_2 and L2 is smallest where sin(theta_2) = 0,
            // so the Pareto set lies on theta_2 = 0
            Toy::Disconnected => (0..n).map(|i| vec![grid(i, 0.0, PI), 0.0]).collect(),
            Toy::Sphere => {
                let mut out = Vec::with_capacity(n * n);
                for i in 0..n {
                    for k in 0..n {
                        let mut theta = vec![0.5; SPHERE_DIM];
                        theta[0] = grid(i, 0.0, 1.0);
                        theta[1] = grid(k, 0.0, 1.0);
                        out.push(theta);
                    }
                }
                out
            }
        }
    }
}

fn convex(t: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
    (
        vec![t * t, (t - 1.0) * (t - 1.0)],
        vec![vec![2.0 * t], vec![2.0 * (t - 1.0)]],
    )
}

fn concave(theta: &[f64], dim: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let s = 1.0 / (dim as f64).sqrt();
    let mut losses = Vec::with_capacity(2);
    let mut jac = Vec::with_capacity(2);
    for sign in [-1.0, 1.0] {
        let sq: f64 = theta.iter().map(|t| (t + sign * s) * (t + sign * s)).sum();
        let e = (-sq).exp();
        losses.push(1.0 - e);
        jac.push(theta.iter().map(|t| 2.0 * (t + sign * s) * e).collect());
    }
    (losses, jac)
}

fn disconnected(t1: f64, t2: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
    let (s1, c1) = t1.sin_cos();
    let (s2, c2) = t2.sin_cos();
    let u = 22.0 * PI * c1 * c1;
    let (su, cu) = u.sin_cos();
    let l1 = c1 * c1 + 0.2;
    let l2 = 1.3 + s2 * s2 - c1 - 0.1 * su.powi(5);
    let du_dt1 = -44.0 * PI * c1 * s1;
    (
        vec![l1, l2],
        vec![
            vec![-2.0 * c1 * s1, 0.0],
            vec![s1 - 0.5 * su.powi(4) * cu * du_dt1, 2.0 * s2 * c2],
        ],
    )
}

fn sphere(theta: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let (s1, c1) = (theta[0] * FRAC_PI_2).sin_cos();
    let (s2, c2) = (theta[1] * FRAC_PI_2).sin_cos();
    let g: f64 = 1.0 + theta[2..].iter().map(|t| (t - 0.5) * (t - 0.5)).sum::<f64>();
    let h = FRAC_PI_2;
    let shape = [c1 * c2, c1 * s2, s1];
    // d(shape)/d(theta_1), d(shape)/d(theta_2)
    let d1 = [-h * s1 * c2, -h * s1 * s2, h * c1];
    let d2 = [-h * c1 * s2, h * c1 * c2, 0.0];
    let losses = shape.iter().map(|f| f * g).collect();
    let jac = (0..3)
        .map(|j| {
            let mut row = vec![0.0; SPHERE_DIM];
            row[0] = d1[j] * g;
            row[1] = d2[j] * g;
            for (k, t) in theta.iter().enumerate().skip(2) {
                row[k] = shape[j] * 2.0 * (t - 0.5);
            }
            row
        })
        .collect();
    (losses, jac)
}
