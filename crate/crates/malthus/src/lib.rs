//! Host side of malthus: OS thread parking, the benchmark workloads, the
//! fixed-time harness and CSV output.
//!
//! The lock algorithms and metrics live in [`malthus_core`], re-exported
//! here as [`core`].

pub use malthus_core as core;

pub mod config;
pub mod error;
pub mod harness;
pub mod platform;
pub mod suite;
pub mod workloads;

pub use config::{BenchConfig, Benchmark, WorkloadSizes};
pub use error::BenchError;
pub use suite::{run_suite, BenchResult};
