use pfl_core::hypervolume::{dominates, filter_nondominated, hv, hv_gradient, FrontSet};
use pfl_core::numerics::Rng;
use proptest::prelude::*;

/// Monte-Carlo dominated volume inside `[0, ref]`, with its standard error.
fn monte_carlo_hv(points: &[Vec<f64>], reference: &[f64], samples: usize, rng: &mut Rng) -> (f64, f64) {
    let volume: f64 = reference.iter().product();
    let mut z = vec![0.0; reference.len()];
    let mut hits = 0usize;
    for _ in 0..samples {
        for (zj, r) in z.iter_mut().zip(reference) {
            *zj = rng.uniform() * r;
        }
        if points.iter().any(|p| p.iter().zip(&z).all(|(a, b)| a <= b)) {
            hits += 1;
        }
    }
    let q = hits as f64 / samples as f64;
    (q * volume, volume * (q * (1.0 - q) / samples as f64).sqrt())
}

fn random_set(rng: &mut Rng, n: usize, j: usize, hi: f64) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..j).map(|_| rng.uniform() * hi).collect()).collect()
}

#[test]
fn exact_matches_monte_carlo() {
    let mut rng = Rng::new(11);
    for case in 0..12 {
        let j = 2 + case % 3;
        let n = 1 + rng.below(8);
        let points = random_set(&mut rng, n, j, 2.0);
        let reference = vec![2.0; j];
        let exact = hv(&points, &reference).unwrap();
        let (mc, se) = monte_carlo_hv(&points, &reference, 200_000, &mut rng);
        assert!((exact - mc).abs() <= 4.0 * se + 1e-12, "case {case}: {exact} vs {mc} +- {se}");
    }
}

#[test]
fn nondominated_filter_matches_brute_force() {
    let mut rng = Rng::new(5);
    for case in 0..200 {
        let j = 2 + case % 4;
        let n = 1 + rng.below(80);
        // coarse values force ties and duplicates
        let points: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..j).map(|_| rng.below(5) as f64).collect())
            .collect();
        let mask = filter_nondominated(&points).unwrap();
        for (i, p) in points.iter().enumerate() {
            let dominated = points.iter().any(|q| q.iter().zip(p).all(|(a, b)| a <= b) && q != p);
            assert_eq!(mask[i], !dominated, "case {case} point {i}");
        }
    }
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = Rng::new(8);
    let h = 1e-6;
    let mut checked = 0;
    while checked < 40 {
        let j = 2 + checked % 3;
        let n = 2 + rng.below(5);
        let points = random_set(&mut rng, n, j, 1.8);
        if filter_nondominated(&points).unwrap().iter().any(|k| !k) {
            continue;
        }
        let reference = vec![2.0; j];
        let grad = hv_gradient(&points, &reference).unwrap();
        for i in 0..n {
            for c in 0..j {
                let mut up = points.clone();
                let mut dn = points.clone();
                up[i][c] += h;
                dn[i][c] -= h;
                let fd = (hv(&up, &reference).unwrap() - hv(&dn, &reference).unwrap()) / (2.0 * h);
                let scale = fd.abs().max(grad[i][c].abs()).max(1e-3);
                assert!((fd - grad[i][c]).abs() / scale <= 1e-5, "{fd} vs {}", grad[i][c]);
            }
        }
        checked += 1;
    }
}

#[test]
fn dominated_points_get_zero_gradient() {
    let pts = vec![vec![0.5, 0.5], vec![1.0, 1.0], vec![2.5, 0.1]];
    let g = hv_gradient(&pts, &[2.0, 2.0]).unwrap();
    assert_eq!(g[1], vec![0.0, 0.0]);
    assert_eq!(g[2], vec![0.0, 0.0]);
    assert_eq!(g[0], vec![-1.5, -1.5]);
}

#[test]
fn front_set_reports_filtered_points() {
    let set = FrontSet::new(vec![vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]], vec![2.0, 2.0]).unwrap();
    assert_eq!(set.hv, 3.0);
    assert_eq!(set.nondominated().count(), 2);
}

#[test]
fn rejects_bad_dimensions() {
    assert!(hv(&[vec![0.5]], &[1.0]).is_err());
    assert!(hv(&[vec![0.5, 0.5]], &[1.0, 1.0, 1.0]).is_err());
    assert!(hv(&[vec![0.5; 9]], &[1.0; 9]).is_err());
}

fn point_set(j: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.0f64..2.0, j), 1..9)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn improving_a_point_never_lowers_hv(points in point_set(3), which in 0usize..8, coord in 0usize..3, delta in 0.0f64..0.5) {
        let reference = [2.0; 3];
        let base = hv(&points, &reference).unwrap();
        let mut better = points.clone();
        let i = which % points.len();
        better[i][coord] = (better[i][coord] - delta).max(0.0);
        prop_assert!(hv(&better, &reference).unwrap() >= base - 1e-12);
    }

    #[test]
    fn translation_invariant(points in point_set(3), shift in prop::collection::vec(-3.0f64..3.0, 3)) {
        let reference = [2.0; 3];
        let moved: Vec<Vec<f64>> = points.iter().map(|p| p.iter().zip(&shift).map(|(a, s)| a + s).collect()).collect();
        let moved_ref: Vec<f64> = reference.iter().zip(&shift).map(|(a, s)| a + s).collect();
        let a = hv(&points, &reference).unwrap();
        let b = hv(&moved, &moved_ref).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
    }

    #[test]
    fn objective_permutation_invariant(points in point_set(4), perm_seed in 0u64..1000) {
        let mut rng = Rng::new(perm_seed);
        let mut perm: Vec<usize> = (0..4).collect();
        rng.shuffle(&mut perm);
        let permuted: Vec<Vec<f64>> = points.iter().map(|p| perm.iter().map(|&k| p[k]).collect()).collect();
        let a = hv(&points, &[2.0; 4]).unwrap();
        let b = hv(&permuted, &[2.0; 4]).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a));
    }

    #[test]
    fn order_and_dominated_points_do_not_matter(points in point_set(2)) {
        let reference = [2.0, 2.0];
        let mut reversed = points.clone();
        reversed.reverse();
        let mask = filter_nondominated(&points).unwrap();
        let kept: Vec<Vec<f64>> = points.iter().zip(&mask).filter(|(_, k)| **k).map(|(p, _)| p.clone()).collect();
        let a = hv(&points, &reference).unwrap();
        prop_assert_eq!(a, hv(&reversed, &reference).unwrap());
        prop_assert!((a - hv(&kept, &reference).unwrap()).abs() <= 1e-15);
        for (i, p) in points.iter().enumerate() {
            prop_assert_eq!(mask[i], !points.iter().any(|q| dominates(q, p)));
        }
    }
}
