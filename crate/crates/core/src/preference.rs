//! Preference vectors: partitioned training rays for two objectives, the
//! simplex lattice, and evenly spread evaluation rays.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Rng;

/// Offset given to zero lattice coordinates of evaluation rays.
pub const BOUNDARY_NUDGE: f64 = 1e-3;

/// A point on the probability simplex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PreferenceVector(Vec<f64>);

impl PreferenceVector {
    /// Validates nonnegativity and unit sum (within 1e-9).
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidArgument("empty preference vector".into()));
        }
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "preference weight {i} = {} is not a nonnegative number",
                weights[i]
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "preference weights sum to {sum}, not 1"
            )));
        }
        Ok(Self(weights))
    }

    pub(crate) fn from_normalized(weights: Vec<f64>) -> Self {
        Self(weights)
    }

    /// Projects a nonnegative direction onto the simplex by its coordinate sum.
    pub fn from_direction(direction: &[f64]) -> Result<Self> {
        let sum: f64 = direction.iter().sum();
        if sum.is_nan() || sum <= 0.0 || direction.iter().any(|d| *d < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "direction {direction:?} is not a nonnegative nonzero vector"
            )));
        }
        Self::new(direction.iter().map(|d| d / sum).collect())
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Polar angle of a two-objective ray, in `[0, pi/2]`.
    pub fn angle(&self) -> f64 {
        self.0[1].atan2(self.0[0])
    }
}

/// Angular cell `i` of `p` equal sectors of the positive quadrant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PartitionCell2D {
    pub index: usize,
    pub count: usize,
}

impl PartitionCell2D {
    pub fn bounds(&self) -> (f64, f64) {
        let width = FRAC_PI_2 / self.count as f64;
        (self.index as f64 * width, (self.index + 1) as f64 * width)
    }

    pub fn contains(&self, angle: f64) -> bool {
        let (lo, hi) = self.bounds();
        lo <= angle && angle <= hi
    }
}

/// Cells `0..p` tiling `[0, pi/2]`.
pub fn partition_cells(p: usize) -> Vec<PartitionCell2D> {
    (0..p)
        .map(|index| PartitionCell2D { index, count: p })
        .collect()
}

/// One ray per angular cell: a uniform angle inside cell `i`, mapped to the
/// simplex by normalizing `(cos, sin)` by its coordinate sum.
pub fn partition_sample_2d(p: usize, rng: &mut Rng) -> Result<Vec<PreferenceVector>> {
    if p == 0 {
        return Err(Error::InvalidArgument("partition sampling needs p >= 1".into()));
    }
    Ok(partition_cells(p)
        .into_iter()
        .map(|cell| {
            let (lo, hi) = cell.bounds();
            let angle = rng.uniform_range(lo, hi);
            ray_at_angle(angle)
        })
        .collect())
}

fn ray_at_angle(angle: f64) -> PreferenceVector {
    let (s, c) = angle.sin_cos();
    let (c, s) = (c.max(0.0), s.max(0.0));
    let sum = c + s;
    PreferenceVector::from_normalized(vec![c / sum, s / sum])
}

/// Simplex lattice with step `1/k` in `j` objectives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeConfig {
    pub objectives: usize,
    pub divisions: usize,
}

impl LatticeConfig {
    pub fn new(objectives: usize, divisions: usize) -> Result<Self> {
        if objectives < 2 || divisions < 1 {
            return Err(Error::InvalidArgument(format!(
                "lattice needs J >= 2 and k >= 1, got J={objectives}, k={divisions}"
            )));
        }
        Ok(Self {
            objectives,
            divisions,
        })
    }

    /// `C(J + k - 1, k)`
    pub fn size(&self) -> u128 {
        binomial((self.objectives + self.divisions - 1) as u128, self.divisions as u128)
    }
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Every simplex point whose coordinates are multiples of `1/k`, in
/// lexicographic order of `(u_1, ..., u_{J-1})`.
pub fn das_dennis_lattice(cfg: LatticeConfig) -> Vec<PreferenceVector> {
    let j = cfg.objectives;
    let k = cfg.divisions;
    let mut out = Vec::with_capacity(cfg.size() as usize);
    let mut counts = vec![0usize; j];
    fill_compositions(&mut counts, 0, k, &mut |c| {
        out.push(PreferenceVector::from_normalized(
            c.iter().map(|&n| n as f64 / k as f64).collect(),
        ));
    });
    out
}

fn fill_compositions(
    counts: &mut [usize],
    pos: usize,
    remaining: usize,
    emit: &mut dyn FnMut(&[usize]),
) {
    if pos == counts.len() - 1 {
        counts[pos] = remaining;
        emit(counts);
        return;
    }
    for n in 0..=remaining {
        counts[pos] = n;
        fill_compositions(counts, pos + 1, remaining - n, emit);
    }
}

/// Evenly spread evaluation rays.
///
/// Two objectives: `count_hint` rays at equal angular spacing over the closed
/// quadrant. Three or more: the smallest lattice holding at least
/// `count_hint` points, with zero coordinates raised to [`BOUNDARY_NUDGE`].
pub fn test_rays(objectives: usize, count_hint: usize) -> Result<Vec<PreferenceVector>> {
    if objectives < 2 {
        return Err(Error::InvalidArgument(format!(
            "test rays need J >= 2, got {objectives}"
        )));
    }
    if objectives == 2 {
        return Ok(match count_hint {
            0 => Vec::new(),
            1 => vec![ray_at_angle(FRAC_PI_2 / 2.0)],
            n => (0..n)
                .map(|i| ray_at_angle(FRAC_PI_2 * i as f64 / (n - 1) as f64))
                .collect(),
        });
    }
    let mut k = 1;
    while LatticeConfig::new(objectives, k)?.size() < count_hint.max(1) as u128 {
        k += 1;
    }
    Ok(das_dennis_lattice(LatticeConfig::new(objectives, k)?)
        .into_iter()
        .map(|r| {
            let nudged: Vec<f64> = r.weights().iter().map(|w| w.max(BOUNDARY_NUDGE)).collect();
            let sum: f64 = nudged.iter().sum();
            PreferenceVector::from_normalized(nudged.iter().map(|w| w / sum).collect())
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn on_simplex(r: &PreferenceVector) -> bool {
        r.weights().iter().all(|&w| w >= 0.0) && (r.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-9
    }

    #[test]
    fn single_partition_ray() {
        let mut rng = Rng::new(1);
        let rays = partition_sample_2d(1, &mut rng).unwrap();
        assert_eq!(rays.len(), 1);
        assert!(on_simplex(&rays[0]));
        assert!((0.0..=FRAC_PI_2).contains(&rays[0].angle()));
    }

    #[test]
    fn sixteen_rays_sorted_by_cell() {
        let mut rng = Rng::new(2);
        let rays = partition_sample_2d(16, &mut rng).unwrap();
        assert_eq!(rays.len(), 16);
        let cells = partition_cells(16);
        for (i, r) in rays.iter().enumerate() {
            assert!(on_simplex(r));
            assert!(cells[i].contains(r.angle()));
        }
        assert!(rays.windows(2).all(|w| w[0].angle() < w[1].angle()));
    }

    #[test]
    fn zero_rays_is_an_error() {
        assert!(partition_sample_2d(0, &mut Rng::new(0)).is_err());
    }

    #[test]
    fn lattice_small_cases() {
        let lat = das_dennis_lattice(LatticeConfig::new(2, 4).unwrap());
        let expect = [[0.0, 1.0], [0.25, 0.75], [0.5, 0.5], [0.75, 0.25], [1.0, 0.0]];
        assert_eq!(lat.len(), 5);
        for (r, e) in lat.iter().zip(expect) {
            assert_eq!(r.weights(), &e);
        }
        assert_eq!(das_dennis_lattice(LatticeConfig::new(3, 5).unwrap()).len(), 21);
        assert_eq!(das_dennis_lattice(LatticeConfig::new(3, 20).unwrap()).len(), 231);
        assert!(LatticeConfig::new(1, 3).is_err());
        assert!(LatticeConfig::new(3, 0).is_err());
    }

    #[test]
    fn evaluation_rays_two_objectives() {
        for n in [200, 25] {
            let rays = test_rays(2, n).unwrap();
            assert_eq!(rays.len(), n);
            let gaps: Vec<f64> = rays.windows(2).map(|w| w[1].angle() - w[0].angle()).collect();
            let first = gaps[0];
            assert!(gaps.iter().all(|g| (g - first).abs() < 1e-12));
            assert!(rays.iter().all(on_simplex));
        }
    }

    #[test]
    fn evaluation_rays_three_objectives() {
        let rays = test_rays(3, 231).unwrap();
        let lattice = das_dennis_lattice(LatticeConfig::new(3, 20).unwrap());
        assert_eq!(rays.len(), 231);
        for (r, u) in rays.iter().zip(&lattice) {
            assert!(on_simplex(r));
            assert!(r.weights().iter().all(|&w| w > 0.0));
            let raw: Vec<f64> = u.weights().iter().map(|w| w.max(BOUNDARY_NUDGE)).collect();
            let s: f64 = raw.iter().sum();
            for (a, b) in r.weights().iter().zip(&raw) {
                assert!((a - b / s).abs() < 1e-15);
            }
        }
        // 232 needs the next lattice
        assert_eq!(test_rays(3, 232).unwrap().len(), 253);
    }

    #[test]
    fn preference_vector_validation() {
        assert!(PreferenceVector::new(vec![0.5, 0.5]).is_ok());
        assert!(PreferenceVector::new(vec![0.5, 0.6]).is_err());
        assert!(PreferenceVector::new(vec![-0.1, 1.1]).is_err());
        assert!(PreferenceVector::from_direction(&[0.0, 0.0]).is_err());
        assert_eq!(PreferenceVector::from_direction(&[1.0, 3.0]).unwrap().weights(), &[0.25, 0.75]);
    }
}
