//! Cartesian-grid comparator: Siddon ray traversal, a Cartesian MART with
//! stored or on-the-fly coefficients, and a benchmark harness comparing it to
//! the polar pipeline.

mod bench;
mod mart;
mod siddon;

pub use bench::{bench_compare, BenchConfig, BenchReport, BenchRow};
pub use mart::{
    cartesian_mart_factor, project_cartesian, reconstruct_cartesian, sweep_on_the_fly, sweep_stored, CartesianReport, CoefficientMode,
    StoredSystem,
};
pub use siddon::{siddon_trace, siddon_trace_into, CartesianSpec};
