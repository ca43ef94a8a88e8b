use std::collections::BTreeSet;
use std::f64::consts::FRAC_PI_2;

use pfl_core::numerics::{sample_dirichlet, Rng};
use pfl_core::preference::{das_dennis_lattice, partition_cells, partition_sample_2d, test_rays, LatticeConfig};

/// Upper 0.1% point of chi-squared with 9 degrees of freedom.
const CHI2_9_999: f64 = 27.877;

#[test]
fn partition_rays_uniform_within_their_cells() {
    let p = 4;
    let bins = 10;
    let draws = 20_000;
    let mut counts = vec![vec![0usize; bins]; p];
    let mut rng = Rng::new(17);
    for _ in 0..draws {
        let rays = partition_sample_2d(p, &mut rng).unwrap();
        for (i, r) in rays.iter().enumerate() {
            let (lo, hi) = partition_cells(p)[i].bounds();
            let a = r.angle();
            assert!(a >= lo - 1e-12 && a <= hi + 1e-12);
            let b = (((a - lo) / (hi - lo)) * bins as f64).floor().clamp(0.0, bins as f64 - 1.0);
            counts[i][b as usize] += 1;
        }
    }
    let expected = draws as f64 / bins as f64;
    for cell in &counts {
        let chi2: f64 = cell.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < CHI2_9_999, "chi2 {chi2} for {cell:?}");
    }
}

#[test]
fn partition_cells_tile_the_quadrant() {
    let cells = partition_cells(7);
    assert_eq!(cells[0].bounds().0, 0.0);
    assert!((cells[6].bounds().1 - FRAC_PI_2).abs() < 1e-15);
    for w in cells.windows(2) {
        assert_eq!(w[0].bounds().1, w[1].bounds().0);
    }
}

fn key(v: &[f64]) -> Vec<i64> {
    v.iter().map(|x| (x * 1e9).round() as i64).collect()
}

#[test]
fn lattice_is_closed_under_permutation() {
    for (j, k) in [(3, 20), (4, 6), (5, 3)] {
        let pts = das_dennis_lattice(LatticeConfig::new(j, k).unwrap());
        let set: BTreeSet<Vec<i64>> = pts.iter().map(|p| key(p.weights())).collect();
        assert_eq!(set.len(), pts.len(), "duplicates");
        for p in &pts {
            let w = p.weights();
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for &x in w {
                assert!(((x * k as f64) - (x * k as f64).round()).abs() < 1e-9);
            }
            let mut rotated = w.to_vec();
            rotated.rotate_left(1);
            let mut swapped = w.to_vec();
            swapped.swap(0, 1);
            assert!(set.contains(&key(&rotated)));
            assert!(set.contains(&key(&swapped)));
        }
    }
}

#[test]
fn lattice_counts_are_binomial() {
    assert_eq!(das_dennis_lattice(LatticeConfig::new(3, 20).unwrap()).len(), 231);
    assert_eq!(das_dennis_lattice(LatticeConfig::new(2, 9).unwrap()).len(), 10);
    assert_eq!(LatticeConfig::new(7, 4).unwrap().size(), 210);
}

#[test]
fn evaluation_rays() {
    let rays = test_rays(2, 200).unwrap();
    assert_eq!(rays.len(), 200);
    let step = FRAC_PI_2 / 199.0;
    for w in rays.windows(2) {
        assert!(((w[0].angle() - w[1].angle()).abs() - step).abs() < 1e-12);
    }
    let rays3 = test_rays(3, 231).unwrap();
    assert_eq!(rays3.len(), 231);
    assert!(rays3.iter().all(|r| r.weights().iter().all(|&x| x > 0.0)));
}

#[test]
fn dirichlet_marginal_variance() {
    // Var(r_1) = a1 (a0 - a1) / (a0^2 (a0 + 1))
    let alpha = [0.5, 1.5, 2.0];
    let a0: f64 = alpha.iter().sum();
    let expect = alpha[0] * (a0 - alpha[0]) / (a0 * a0 * (a0 + 1.0));
    let mut rng = Rng::new(23);
    let n = 100_000;
    let draws: Vec<f64> = (0..n).map(|_| sample_dirichlet(&alpha, &mut rng).unwrap().weights()[0]).collect();
    let mean = draws.iter().sum::<f64>() / n as f64;
    let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    assert!((var - expect).abs() / expect < 0.03, "{var} vs {expect}");
}
