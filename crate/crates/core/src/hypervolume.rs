//! Exact hypervolume, Pareto filtering and analytic hypervolume partials.
//!
//! All objectives are minimized. A point contributes to the hypervolume only
//! if it strictly dominates the reference point in every coordinate.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Largest objective count accepted by the public entry points.
pub const MAX_OBJECTIVES: usize = 8;

/// `a` Pareto-dominates `b`: no worse anywhere and not identical.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    debug_assert_eq!(a.len(), b.len());
    let mut strictly_better = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly_better = true;
        }
    }
    strictly_better
}

fn strictly_below(point: &[f64], reference: &[f64]) -> bool {
    point.iter().zip(reference).all(|(p, r)| p < r)
}

fn check_points(points: &[Vec<f64>], dim: Option<usize>) -> Result<usize> {
    let dim = match dim.or_else(|| points.first().map(Vec::len)) {
        Some(d) => d,
        None => return Ok(0),
    };
    for (i, p) in points.iter().enumerate() {
        if p.len() != dim {
            return Err(Error::dims(format!("point {i}"), dim, p.len()));
        }
        ensure_finite(&format!("point {i}"), p)?;
    }
    Ok(dim)
}

fn check_reference(points: &[Vec<f64>], reference: &[f64]) -> Result<()> {
    let j = reference.len();
    if !(2..=MAX_OBJECTIVES).contains(&j) {
        return Err(Error::InvalidArgument(format!(
            "objective count {j} outside 2..={MAX_OBJECTIVES}"
        )));
    }
    ensure_finite("reference point", reference)?;
    check_points(points, Some(j))?;
    Ok(())
}

/// Nondominance mask: `mask[i]` is true iff no other point dominates point `i`.
/// Identical points do not dominate each other.
pub fn filter_nondominated(points: &[Vec<f64>]) -> Result<Vec<bool>> {
    let dim = check_points(points, None)?;
    if dim == 2 && points.len() > 32 {
        return Ok(nondominated_2d(points));
    }
    Ok(points
        .iter()
        .map(|p| !points.iter().any(|q| dominates(q, p)))
        .collect())
}

/// O(n log n) sweep for two objectives.
fn nondominated_2d(points: &[Vec<f64>]) -> Vec<bool> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a][0]
            .total_cmp(&points[b][0])
            .then(points[a][1].total_cmp(&points[b][1]))
    });
    let mut mask = vec![false; points.len()];
    let mut best_before = f64::INFINITY;
    let mut i = 0;
    while i < order.len() {
        let head = &points[order[i]];
        let mut end = i + 1;
        while end < order.len() && points[order[end]] == *head {
            end += 1;
        }
        let keep = head[1] < best_before;
        for &idx in &order[i..end] {
            mask[idx] = keep;
        }
        best_before = best_before.min(head[1]);
        i = end;
    }
    mask
}

/// Exact hypervolume dominated by `points` and bounded by `reference`.
///
/// Two objectives use a sorted sweep. Higher dimensions slice along the last
/// objective and recurse on exclusive contributions computed from limit sets.
pub fn hv(points: &[Vec<f64>], reference: &[f64]) -> Result<f64> {
    check_reference(points, reference)?;
    let inside: Vec<Vec<f64>> = points
        .iter()
        .filter(|p| strictly_below(p, reference))
        .cloned()
        .collect();
    Ok(hv_unchecked(inside, reference))
}

/// Hypervolume of points that already strictly dominate `reference`, in the
/// dimension of `reference` (which may be 1).
fn hv_unchecked(mut points: Vec<Vec<f64>>, reference: &[f64]) -> f64 {
    let dim = reference.len();
    match (points.len(), dim) {
        (0, _) => 0.0,
        (_, 1) => reference[0] - points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min),
        (1, _) => box_volume(&points[0], reference),
        (_, 2) => hv_2d(&mut points, reference),
        _ => {
            retain_nondominated(&mut points);
            hv_sliced(&mut points, reference)
        }
    }
}

fn box_volume(point: &[f64], reference: &[f64]) -> f64 {
    point.iter().zip(reference).map(|(p, r)| r - p).product()
}

fn hv_2d(points: &mut [Vec<f64>], reference: &[f64]) -> f64 {
    points.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let mut area = 0.0;
    let mut ceiling = reference[1];
    for p in points.iter() {
        if p[1] < ceiling {
            area += (reference[0] - p[0]) * (ceiling - p[1]);
            ceiling = p[1];
        }
    }
    area
}

fn retain_nondominated(points: &mut Vec<Vec<f64>>) {
    let keep: Vec<bool> = points
        .iter()
        .map(|p| !points.iter().any(|q| dominates(q, p)))
        .collect();
    let mut it = keep.iter();
    points.retain(|_| *it.next().unwrap());
    points.dedup();
}

/// Sort worst-first on the last objective; the slab `[z_i, ref_z]` of point `i`
/// is covered by its exclusive (d-1)-dimensional contribution with respect
/// to every point after it, all of which are at least as good in `z`.
fn hv_sliced(points: &mut [Vec<f64>], reference: &[f64]) -> f64 {
    let d = reference.len();
    let last = d - 1;
    points.sort_by(|a, b| b[last].total_cmp(&a[last]));
    let lower_ref = &reference[..last];
    let mut volume = 0.0;
    for i in 0..points.len() {
        let height = reference[last] - points[i][last];
        if height <= 0.0 {
            continue;
        }
        let p = &points[i][..last];
        let limit: Vec<Vec<f64>> = points[i + 1..]
            .iter()
            .map(|q| q[..last].iter().zip(p).map(|(a, b)| a.max(*b)).collect())
            .collect();
        let exclusive = box_volume(p, lower_ref) - hv_unchecked(limit, lower_ref);
        volume += height * exclusive;
    }
    volume
}

/// Partial derivatives of the hypervolume with respect to every coordinate
/// of every point, as a `p x J` matrix.
///
/// Rows of dominated points and of points that do not strictly dominate the
/// reference are zero. For a contributing point `i`, the partial along `j` is
/// minus the `(J-1)`-dimensional measure of the face of its box orthogonal to
/// `j` that is not covered by points strictly better than `i` in `j`.
pub fn hv_gradient(points: &[Vec<f64>], reference: &[f64]) -> Result<Vec<Vec<f64>>> {
    check_reference(points, reference)?;
    let dim = reference.len();
    let mut grad = vec![vec![0.0; dim]; points.len()];
    let inside: Vec<usize> = (0..points.len())
        .filter(|&i| strictly_below(&points[i], reference))
        .collect();
    for &i in &inside {
        let p = &points[i];
        if inside.iter().any(|&k| dominates(&points[k], p)) {
            continue;
        }
        for j in 0..dim {
            let face_ref = drop_coord(reference, j);
            let face_point = drop_coord(p, j);
            let covering: Vec<Vec<f64>> = inside
                .iter()
                .filter(|&&k| k != i && points[k][j] < p[j])
                .map(|&k| {
                    drop_coord(&points[k], j)
                        .iter()
                        .zip(&face_point)
                        .map(|(a, b)| a.max(*b))
                        .collect()
                })
                .collect();
            let face = box_volume(&face_point, &face_ref) - hv_unchecked(covering, &face_ref);
            grad[i][j] = -face;
        }
    }
    Ok(grad)
}

fn drop_coord(v: &[f64], j: usize) -> Vec<f64> {
    v.iter()
        .enumerate()
        .filter(|&(k, _)| k != j)
        .map(|(_, x)| *x)
        .collect()
}

/// Evaluated objective-space points with their nondominance flags and
/// hypervolume.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontSet {
    pub points: Vec<Vec<f64>>,
    pub reference: Vec<f64>,
    pub nondominated_mask: Vec<bool>,
    pub hv: f64,
}

impl FrontSet {
    pub fn new(points: Vec<Vec<f64>>, reference: Vec<f64>) -> Result<Self> {
        let hv = hv(&points, &reference)?;
        let nondominated_mask = filter_nondominated(&points)?;
        Ok(Self {
            points,
            reference,
            nondominated_mask,
            hv,
        })
    }

    pub fn nondominated(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.points
            .iter()
            .zip(&self.nondominated_mask)
            .filter(|(_, keep)| **keep)
            .map(|(p, _)| p)
    }
}
