use crate::error::{Error, Result};
use crate::numerics::dot;

/// Duality-gap target for the Frank-Wolfe iterations.
pub const FW_GAP_TOLERANCE: f64 = 1e-10;
const FW_MAX_ITERS: usize = 100_000;

/// Minimum-norm element of the convex hull of `gradients`.
///
/// Returns the simplex weights and the combined vector. Two gradients are
/// solved in closed form; more use away-step Frank-Wolfe on the Gram matrix
/// with exact line search, stopping at a duality gap of
/// [`FW_GAP_TOLERANCE`].
pub fn min_norm_convex_hull(gradients: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    let first = gradients
        .first()
        .ok_or_else(|| Error::InvalidArgument("no gradients given".into()))?;
    let dim = first.len();
    if dim == 0 {
        return Err(Error::InvalidArgument("gradients have zero length".into()));
    }
    for (k, g) in gradients.iter().enumerate() {
        if g.len() != dim {
            return Err(Error::dims(format!("gradient {k}"), dim, g.len()));
        }
        crate::error::ensure_finite(&format!("gradient {k}"), g)?;
    }
    let n = gradients.len();
    let gram: Vec<Vec<f64>> = (0..n)
        .map(|a| (0..n).map(|b| dot(&gradients[a], &gradients[b])).collect())
        .collect();
    let weights = match n {
        1 => vec![1.0],
        2 => {
            let diff = gram[0][0] - 2.0 * gram[0][1] + gram[1][1];
            let gamma = if diff > 0.0 {
                ((gram[1][1] - gram[0][1]) / diff).clamp(0.0, 1.0)
            } else {
                0.5
            };
            vec![gamma, 1.0 - gamma]
        }
        _ => frank_wolfe(&gram),
    };
    let mut combined = vec![0.0; dim];
    for (w, g) in weights.iter().zip(gradients) {
        crate::numerics::axpy(*w, g, &mut combined);
    }
    Ok((weights, combined))
}

fn frank_wolfe(gram: &[Vec<f64>]) -> Vec<f64> {
    let n = gram.len();
    // start at the vertex with the smallest norm
    let start = (0..n)
        .min_by(|&a, &b| gram[a][a].total_cmp(&gram[b][b]))
        .unwrap_or(0);
    let mut w = vec![0.0; n];
    w[start] = 1.0;
    let mut gw: Vec<f64> = (0..n).map(|k| gram[k][start]).collect();
    for _ in 0..FW_MAX_ITERS {
        let wgw = dot(&w, &gw);
        let toward = (0..n).min_by(|&a, &b| gw[a].total_cmp(&gw[b])).unwrap();
        let fw_gap = 2.0 * (wgw - gw[toward]);
        if fw_gap <= FW_GAP_TOLERANCE {
            break;
        }
        let away = (0..n)
            .filter(|&k| w[k] > 0.0)
            .max_by(|&a, &b| gw[a].total_cmp(&gw[b]))
            .unwrap();
        let away_gap = 2.0 * (gw[away] - wgw);
        // direction d = e_toward - w (FW) or w - e_away (away step)
        let (d, t_max) = if fw_gap >= away_gap {
            let mut d: Vec<f64> = w.iter().map(|x| -x).collect();
            d[toward] += 1.0;
            (d, 1.0)
        } else {
            let mut d = w.clone();
            d[away] -= 1.0;
            let wa = w[away];
            (d, if wa < 1.0 { wa / (1.0 - wa) } else { f64::INFINITY })
        };
        let gd: Vec<f64> = (0..n).map(|k| dot(&gram[k], &d)).collect();
        let slope = dot(&d, &gw);
        let curvature = dot(&d, &gd);
        let t = if curvature > 0.0 {
            (-slope / curvature).clamp(0.0, t_max)
        } else {
            t_max
        };
        if !t.is_finite() || t <= 0.0 {
            break;
        }
        for k in 0..n {
            w[k] = (w[k] + t * d[k]).max(0.0);
            gw[k] += t * gd[k];
        }
        let total: f64 = w.iter().sum();
        for x in &mut w {
            *x /= total;
        }
    }
    w
}
