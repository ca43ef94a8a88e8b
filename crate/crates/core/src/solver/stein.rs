use std::f64::consts::PI;

use super::{cosine, cosine_alignment_grad, effective_ref_point, min_norm_convex_hull};
use super::{Bandwidth, Direction, RayEval, StepReport, TrainConfig};
use crate::error::Result;
use crate::hypervolume::hv;
use crate::network::Hypernetwork;
use crate::numerics::{axpy, dot, norm};

/// Gaussian kernel `det(2 pi sigma^2 I)^(-1/2) exp(-|a - b|^2 / (2 sigma^2))`.
pub fn kernel(a: &[f64], b: &[f64], sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (2.0 * PI * s2).powf(-(a.len() as f64) / 2.0) * (-d2 / (2.0 * s2)).exp()
}

/// Gradient of [`kernel`] with respect to its first argument.
pub fn kernel_gradient(a: &[f64], b: &[f64], sigma: f64) -> Vec<f64> {
    let k = kernel(a, b, sigma);
    let s2 = sigma * sigma;
    a.iter().zip(b).map(|(x, y)| -k * (x - y) / s2).collect()
}

/// Median heuristic: `2 sigma^2 = median(|L_i - L_k|)^2 / ln p`. Falls back to
/// `sigma = 1` when the points coincide or there is a single point.
pub fn median_bandwidth(points: &[Vec<f64>]) -> f64 {
    let p = points.len();
    let mut dists: Vec<f64> = Vec::with_capacity(p * p.saturating_sub(1) / 2);
    for i in 0..p {
        for k in i + 1..p {
            dists.push(
                points[i]
                    .iter()
                    .zip(&points[k])
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt(),
            );
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    dists.sort_by(f64::total_cmp);
    let m = dists.len();
    let median = if m % 2 == 1 {
        dists[m / 2]
    } else {
        0.5 * (dists[m / 2 - 1] + dists[m / 2])
    };
    if median <= 1e-12 {
        return 1.0;
    }
    (median * median / (2.0 * (p as f64).ln())).sqrt()
}

/// `sum_i d_i - lambda * sum_i dcos_i/dphi` with
/// `d_i = sum_k [g_k k(L_i, L_k) - grad k(L_i, L_k)]`.
///
/// `g_k` is the min-norm element of the per-objective parameter gradients of
/// ray `k`. The kernel gradient is taken with respect to the neighbour's
/// position, which by symmetry is minus the gradient in `L_i`; it is pulled
/// back through ray `i`'s Jacobian, so descending the direction pushes the
/// loss vectors apart.
pub(super) fn stein_direction(
    hn: &Hypernetwork,
    evals: &[RayEval<'_>],
    cfg: &TrainConfig,
) -> Result<Direction> {
    let p = evals.len();
    let losses: Vec<Vec<f64>> = evals.iter().map(|e| e.losses.values.clone()).collect();
    let sigma = match cfg.sigma {
        Bandwidth::Median => median_bandwidth(&losses),
        Bandwidth::Fixed(s) => s,
    };
    let n = hn.param_count();

    // min-norm common descent direction per ray
    let mut driving = Vec::with_capacity(p);
    for eval in evals {
        let per_objective = eval
            .losses
            .jacobian
            .iter()
            .map(|row| {
                let mut g = vec![0.0; n];
                hn.backprop_to_phi(&eval.tape, row, &mut g)?;
                Ok(g)
            })
            .collect::<Result<Vec<_>>>()?;
        driving.push(min_norm_convex_hull(&per_objective)?.1);
    }

    let mut grad = vec![0.0; n];
    let mut repulsion_sq = 0.0;
    let mut cos_sq = 0.0;
    let mut cos_sum = 0.0;
    for k in 0..p {
        let weight: f64 = (0..p).map(|i| kernel(&losses[i], &losses[k], sigma)).sum();
        axpy(weight, &driving[k], &mut grad);
    }
    for (i, eval) in evals.iter().enumerate() {
        let mut loss_grad = vec![0.0; losses[i].len()];
        for k in 0..p {
            let kg = kernel_gradient(&losses[i], &losses[k], sigma);
            axpy(1.0, &kg, &mut loss_grad);
        }
        repulsion_sq += dot(&loss_grad, &loss_grad);
        let r = eval.ray.weights();
        cos_sum += cosine(r, &losses[i]);
        if cfg.lambda != 0.0 {
            let c = cosine_alignment_grad(r, &losses[i])?;
            axpy(-cfg.lambda, &c, &mut loss_grad);
            cos_sq += cfg.lambda * cfg.lambda * dot(&c, &c);
        }
        hn.backprop_to_phi(&eval.tape, &eval.losses.pullback(&loss_grad), &mut grad)?;
    }

    let reference = effective_ref_point(&losses, &cfg.ref_point, cfg.gamma);
    let report = StepReport {
        iteration: 0,
        rays: evals.iter().map(|e| e.ray.weights().to_vec()).collect(),
        hv: hv(&losses, &reference)?,
        losses,
        mean_cosine: cos_sum / p as f64,
        grad_norm: norm(&grad),
        hv_grad_norm: repulsion_sq.sqrt(),
        cosine_grad_norm: cos_sq.sqrt(),
        reference,
    };
    Ok(Direction { grad, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_symmetry_and_peak() {
        let a = [0.3, 0.9];
        let b = [1.1, -0.2];
        let s = 0.7;
        assert_eq!(kernel(&a, &b, s), kernel(&b, &a, s));
        let peak = (2.0 * PI * s * s).powf(-1.0);
        assert!((kernel(&a, &a, s) - peak).abs() < 1e-15);
    }

    #[test]
    fn wide_kernel_is_flat() {
        let a = [0.3, 0.9];
        let b = [1.1, -0.2];
        let s = 1e6;
        let ratio = kernel(&a, &b, s) / kernel(&a, &a, s);
        assert!((ratio - 1.0).abs() < 1e-12);
        let g = kernel_gradient(&a, &b, s);
        assert!(norm(&g) < 1e-20);
    }

    #[test]
    fn kernel_gradient_matches_differences() {
        let a = [0.3, 0.9, 0.1];
        let b = [0.5, 0.4, 0.2];
        let s = 0.6;
        let g = kernel_gradient(&a, &b, s);
        let h = 1e-6;
        for j in 0..3 {
            let mut up = a;
            let mut dn = a;
            up[j] += h;
            dn[j] -= h;
            let fd = (kernel(&up, &b, s) - kernel(&dn, &b, s)) / (2.0 * h);
            assert!((fd - g[j]).abs() < 1e-8 * (1.0 + g[j].abs()));
        }
    }

    #[test]
    fn median_rule() {
        let pts = vec![vec![0.0, 0.0], vec![3.0, 4.0]];
        let s = median_bandwidth(&pts);
        assert!((2.0 * s * s - 25.0 / 2f64.ln()).abs() < 1e-12);
        assert_eq!(median_bandwidth(&[vec![1.0, 1.0], vec![1.0, 1.0]]), 1.0);
    }
}
