//! Pareto front learning with hypernetworks.
//!
//! A hypernetwork maps a preference ray on the simplex to the parameters of a
//! target model. Training pushes a batch of ray-conditioned solutions toward
//! the Pareto front while keeping each solution aligned with its ray.

pub mod csvio;
pub mod error;
pub mod evalkit;
pub mod hypervolume;
pub mod network;
pub mod numerics;
pub mod preference;
pub mod problems;
pub mod solver;

pub use error::{Error, Result};
