//! Benchmark harness for `ife-core`: workload selection, policy-by-thread grids,
//! result verification, CSV reports, per-level tables and speedup charts.

pub mod chart;
pub mod error;
pub mod grid;
pub mod table;
pub mod verify;
pub mod workload;

pub use error::BenchError;
