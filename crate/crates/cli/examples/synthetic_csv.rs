//! Writes the synthetic multi-task regression table that `problem = "tabular"`
//! falls back to when no `data.path` is configured.
//!
//! ```text
//! cargo run --example synthetic_csv -- [rows] [features] [tasks] [noise] [seed] > data.csv
//! ```
//!
//! Sizes default to the config defaults. Runs seed the generator from their
//! own data stream, so this table is not the one a run with the same seed
//! would build; point `data.path` at the file to train on it.

use std::io;

use pfl_core::numerics::Rng;
use pfl_core::problems::synthetic_regression;

fn arg<T: std::str::FromStr>(args: &[String], i: usize, default: T) -> T {
    args.get(i).map_or(default, |s| s.parse().unwrap_or_else(|_| panic!("bad argument {s:?}")))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let rows = arg(&args, 0, 1000usize);
    let features = arg(&args, 1, 8usize);
    let tasks = arg(&args, 2, 4usize);
    let noise = arg(&args, 3, 0.1f64);
    let seed = arg(&args, 4, 42u64);
    let table = synthetic_regression(rows, features, tasks, noise, &mut Rng::new(seed));
    table.write_csv(io::stdout().lock())?;
    Ok(())
}
