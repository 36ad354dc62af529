//! Joint task-assignment, subchannel, CPU, and MIMO beamforming optimization
//! for device-to-device edge networks.
//!
//! The crate models a network of `K` multi-antenna nodes, each holding one
//! computation task that can be processed locally or offloaded to a peer over
//! one of `S` frequency subchannels. The cost of a configuration is the total
//! network overhead: a per-task weighted sum of time and energy spent on
//! communication and computation. Modules:
//!
//! * [`scenario`] -- reproducible random scenario generation (geometry,
//!   Rayleigh MIMO channels, task sizes, CPU capacities) and CSI distortion.
//! * [`overhead`] -- SINR, rate, and time/energy/overhead evaluation for any
//!   allocation and beamforming state.
//! * [`cpu`] -- exact per-receiver convex CPU allocation and the equal-split
//!   baseline.
//! * [`beamforming`] -- communication-overhead-minimizing coordinated
//!   beamforming (MMSE combiners, fractional-programming multipliers, and a
//!   closed-form per-transmitter QCQP with power bisection).
//! * [`topology`] -- greedy task-assignment / subchannel / CPU allocation.
//! * [`solvers`] -- the alternate optimizer, semi-exhaustive search, and the
//!   local / wmmse / equal-cpu baselines.

pub mod beamforming;
pub mod cpu;
pub mod error;
pub mod linalg;
pub mod overhead;
pub mod rng;
pub mod scenario;
pub mod solvers;
pub mod topology;

pub use error::{Error, Result};
