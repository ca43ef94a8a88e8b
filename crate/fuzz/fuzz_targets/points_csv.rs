#![no_main]

use libfuzzer_sys::fuzz_target;
use pfl_core::csvio::read_points_csv;
use pfl_core::hypervolume::hv;

fuzz_target!(|data: &[u8]| {
    let Ok(points) = read_points_csv(data) else { return };
    let Some(first) = points.first() else { return };
    let j = first.len();
    assert!(points.iter().all(|p| p.len() == j && p.iter().all(|v| v.is_finite())));
    // keep the exact algorithm within reach
    if (1..=4).contains(&j) && points.len() <= 32 {
        if let Ok(v) = hv(&points, &vec![2.0; j]) {
            assert!(v.is_finite() && v >= 0.0 && v <= 2f64.powi(j as i32) * (1.0 + 1e-12));
        }
    }
});
