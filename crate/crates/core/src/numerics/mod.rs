//! Deterministic numeric substrate: seeded sampling, a reverse-mode MLP and Adam.
//!
//! Every reduction runs in a fixed index order so that two runs with the same
//! seed produce bitwise-identical results.

mod adam;
mod mlp;
mod rng;

pub use adam::AdamState;
pub use mlp::{
    init_params, mlp_backward, mlp_backward_accumulate, mlp_forward, Activation, FlatParams,
    LayoutEntry, MlpSpec, Tape,
};
pub use rng::{sample_dirichlet, Rng};

/// Dot product in index order.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
