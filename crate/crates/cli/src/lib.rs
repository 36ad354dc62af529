//! Experiment harness for the d2d-offload optimizer: configuration loading,
//! parameter sweeps, the dynamic-queue simulation, runtime-growth
//! measurement, and result emission.

pub mod config;
pub mod output;
pub mod queue;
pub mod runtime;
pub mod sweep;
