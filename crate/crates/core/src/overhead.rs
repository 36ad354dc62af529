//! Overhead model: SINR, achievable rate, and time/energy accounting.
//!
//! Evaluation here is exact in the model sense: rates come from the SINR
//! formula with the stored combiners, never from a solver surrogate.
//! Infeasible links (zero rate, zero CPU) evaluate to `+inf` overhead rather
//! than an error so that search layers can compare and reject them.

use crate::error::{Error, Result};
use crate::linalg::{norm_sq, vdot, C64};
use crate::scenario::{ChannelSet, NetworkScenario};
use serde::{Deserialize, Serialize};

/// Task-to-node assignment and subchannel choice (binary part of a solution).
///
/// `target[k]` is the node processing task `k`; `subchannel[k]` is `Some(i)`
/// exactly when the task is offloaded (`target[k] != k`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    target: Vec<usize>,
    subchannel: Vec<Option<usize>>,
}

impl Assignment {
    pub fn new(
        target: Vec<usize>,
        subchannel: Vec<Option<usize>>,
        subchannel_count: usize,
    ) -> Result<Self> {
        let k = target.len();
        if subchannel.len() != k {
            return Err(Error::InvalidState(
                "target and subchannel lists differ in length".into(),
            ));
        }
        for (task, &t) in target.iter().enumerate() {
            if t >= k {
                return Err(Error::InvalidState(format!(
                    "task {task} assigned to nonexistent node {t}"
                )));
            }
            match (t == task, subchannel[task]) {
                (true, None) => {}
                (true, Some(_)) => {
                    return Err(Error::InvalidState(format!(
                        "local task {task} must not hold a subchannel"
                    )))
                }
                (false, None) => {
                    return Err(Error::InvalidState(format!(
                        "offloaded task {task} has no subchannel"
                    )))
                }
                (false, Some(i)) if i >= subchannel_count => {
                    return Err(Error::InvalidState(format!(
                        "task {task} uses nonexistent subchannel {i}"
                    )))
                }
                _ => {}
            }
        }
        // At most one transmitter per (receiver, subchannel).
        let mut seen = std::collections::HashSet::new();
        for task in 0..k {
            if let Some(i) = subchannel[task] {
                if !seen.insert((target[task], i)) {
                    return Err(Error::InvalidState(format!(
                        "receiver {} hears two transmitters on subchannel {i}",
                        target[task]
                    )));
                }
            }
        }
        Ok(Self { target, subchannel })
    }

    pub fn all_local(node_count: usize) -> Self {
        Self {
            target: (0..node_count).collect(),
            subchannel: vec![None; node_count],
        }
    }

    pub fn node_count(&self) -> usize {
        self.target.len()
    }

    pub fn target(&self, task: usize) -> usize {
        self.target[task]
    }

    pub fn subchannel(&self, task: usize) -> Option<usize> {
        self.subchannel[task]
    }

    pub fn is_local(&self, task: usize) -> bool {
        self.target[task] == task
    }

    /// Active streams as `(transmitter, receiver, subchannel)` tuples,
    /// ascending in transmitter id.
    pub fn streams(&self) -> Vec<(usize, usize, usize)> {
        (0..self.target.len())
            .filter_map(|k| self.subchannel[k].map(|i| (k, self.target[k], i)))
            .collect()
    }

    /// Transmitters active on the given subchannel, ascending.
    pub fn co_channel_transmitters(&self, sub: usize) -> Vec<usize> {
        (0..self.target.len())
            .filter(|&k| self.subchannel[k] == Some(sub))
            .collect()
    }

    /// Tasks processed at the given node, ascending.
    pub fn tasks_at(&self, node: usize) -> Vec<usize> {
        (0..self.target.len()).filter(|&k| self.target[k] == node).collect()
    }

    /// Binary assignment matrix `a[k][k']`.
    pub fn assignment_matrix(&self) -> Vec<Vec<u8>> {
        let k = self.target.len();
        let mut a = vec![vec![0u8; k]; k];
        for task in 0..k {
            a[task][self.target[task]] = 1;
        }
        a
    }

    /// Binary subchannel matrix `b[k][i]`.
    pub fn subchannel_matrix(&self, subchannel_count: usize) -> Vec<Vec<u8>> {
        let k = self.target.len();
        let mut b = vec![vec![0u8; subchannel_count]; k];
        for task in 0..k {
            if let Some(i) = self.subchannel[task] {
                b[task][i] = 1;
            }
        }
        b
    }
}

/// Full allocation: assignment plus per-task CPU shares.
///
/// `cpu[k]` is the CPU (Hz) that node `target[k]` dedicates to task `k`;
/// the implicit allocation to every other node is zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllocationState {
    pub assignment: Assignment,
    pub cpu: Vec<f64>,
}

impl AllocationState {
    pub fn new(assignment: Assignment, cpu: Vec<f64>, scenario: &NetworkScenario) -> Result<Self> {
        let k = assignment.node_count();
        if cpu.len() != k {
            return Err(Error::InvalidState("cpu list length mismatch".into()));
        }
        if let Some(bad) = cpu.iter().position(|f| *f < 0.0 || !f.is_finite()) {
            return Err(Error::InvalidState(format!(
                "task {bad} has invalid CPU share {}",
                cpu[bad]
            )));
        }
        for node in 0..k {
            let used: f64 = assignment.tasks_at(node).iter().map(|&t| cpu[t]).sum();
            let cap = scenario.cpus[node];
            if used > cap * (1.0 + 1e-8) {
                return Err(Error::InvalidState(format!(
                    "node {node} oversubscribed: {used} Hz > capacity {cap} Hz"
                )));
            }
        }
        Ok(Self { assignment, cpu })
    }
}

/// Transmit beamformers, receive combiners, and solver auxiliaries.
///
/// Every node carries a beamformer (idle nodes keep their last or initial
/// vector so later optimization passes can warm-start). Combiners and the
/// `w`/`lambda`/`gamma` auxiliaries are per active stream, indexed by the
/// transmitting task; the pair `(receiver, subchannel)` is implied by the
/// assignment, and at most one stream exists per such pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamformingState {
    pub tx_beams: Vec<Vec<C64>>,
    pub combiners: Vec<Option<Vec<C64>>>,
    /// MSE auxiliary `w` per stream (1 when idle).
    pub mse_weights: Vec<f64>,
    /// Fractional-programming multiplier `lambda` per stream (0 when idle).
    pub lambda: Vec<f64>,
    /// Fractional-programming multiplier `gamma` per stream (0 when idle).
    pub gamma: Vec<f64>,
}

impl BeamformingState {
    pub fn idle(node_count: usize, antenna_count: usize) -> Self {
        Self {
            tx_beams: vec![vec![C64::new(0.0, 0.0); antenna_count]; node_count],
            combiners: vec![None; node_count],
            mse_weights: vec![1.0; node_count],
            lambda: vec![0.0; node_count],
            gamma: vec![0.0; node_count],
        }
    }

    pub fn from_beams(tx_beams: Vec<Vec<C64>>) -> Self {
        let k = tx_beams.len();
        Self {
            tx_beams,
            combiners: vec![None; k],
            mse_weights: vec![1.0; k],
            lambda: vec![0.0; k],
            gamma: vec![0.0; k],
        }
    }
}

/// Time, energy, and their weighted combination for one task component.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverheadTerm {
    pub time: f64,
    pub energy: f64,
    pub overhead: f64,
}

impl OverheadTerm {
    /// Combine time and energy with weight `beta`: `(1-beta)*T + beta*E`.
    pub fn new(beta: f64, time: f64, energy: f64) -> Self {
        Self {
            time,
            energy,
            overhead: (1.0 - beta) * time + beta * energy,
        }
    }

    pub const ZERO: OverheadTerm = OverheadTerm {
        time: 0.0,
        energy: 0.0,
        overhead: 0.0,
    };

    /// Sentinel for an infeasible component (zero rate or zero CPU).
    pub const INFEASIBLE: OverheadTerm = OverheadTerm {
        time: f64::INFINITY,
        energy: f64::INFINITY,
        overhead: f64::INFINITY,
    };

    pub fn is_finite(&self) -> bool {
        self.overhead.is_finite()
    }
}

/// Network-wide overhead accounting split by task and by component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverheadReport {
    pub per_task_comm: Vec<OverheadTerm>,
    pub per_task_comp: Vec<OverheadTerm>,
    pub comm_total: f64,
    pub comp_total: f64,
    pub total: f64,
    pub time_total: f64,
    pub energy_total: f64,
    pub feasible: bool,
}

/// SINR of the stream `tx -> rx` on subchannel `sub`: desired power over
/// co-channel interference plus noise, with the stored combiner.
pub fn sinr(
    tx: usize,
    rx: usize,
    sub: usize,
    alloc: &Assignment,
    beams: &BeamformingState,
    channels: &ChannelSet,
    noise_power: f64,
) -> Result<f64> {
    if alloc.subchannel(tx) != Some(sub) || alloc.target(tx) != rx {
        return Err(Error::InvalidState(format!(
            "stream ({tx},{rx},{sub}) is not active"
        )));
    }
    let z = beams.combiners[tx]
        .as_ref()
        .ok_or_else(|| Error::InvalidState(format!("no combiner stored for stream {tx}")))?;
    let zn = norm_sq(z);
    if zn == 0.0 {
        return Err(Error::InvalidState(format!("zero combiner for stream {tx}")));
    }
    let hf = channels.gain(tx, rx, sub).mul_vec(&beams.tx_beams[tx]);
    let signal = vdot(z, &hf).norm_sqr();
    let mut interference = 0.0;
    for other in alloc.co_channel_transmitters(sub) {
        if other == tx {
            continue;
        }
        let hfo = channels.gain(other, rx, sub).mul_vec(&beams.tx_beams[other]);
        interference += vdot(z, &hfo).norm_sqr();
    }
    Ok(signal / (interference + noise_power * zn))
}

/// Achievable rate of task `tx`'s stream, bits/second: `W log2(1 + SINR)`.
///
/// A dead link (absent or zero combiner, as the MMSE combiner of a zero
/// channel is) carries nothing and yields rate 0, which downstream overhead
/// evaluation turns into the infeasible sentinel.
pub fn rate(
    tx: usize,
    rx: usize,
    alloc: &Assignment,
    beams: &BeamformingState,
    scenario: &NetworkScenario,
) -> Result<f64> {
    let sub = alloc
        .subchannel(tx)
        .ok_or_else(|| Error::InvalidState(format!("task {tx} has no active subchannel")))?;
    let dead = beams.combiners[tx].as_ref().map_or(true, |z| norm_sq(z) == 0.0);
    if dead {
        return Ok(0.0);
    }
    let s = sinr(tx, rx, sub, alloc, beams, &scenario.channels, scenario.params.noise_power)?;
    Ok(scenario.params.bandwidth * (1.0 + s).log2())
}

/// Computation overhead of task `task` processed at `node` with CPU share
/// `cpu_hz`: time `mu*I/F`, energy `kappa*F^2*mu*I`.
pub fn comp_overhead(task: usize, _node: usize, cpu_hz: f64, scenario: &NetworkScenario) -> OverheadTerm {
    if cpu_hz <= 0.0 {
        return OverheadTerm::INFEASIBLE;
    }
    let cycles = scenario.params.processing_density * scenario.task_sizes[task];
    let time = cycles / cpu_hz;
    let energy = scenario.params.energy_coefficient * cpu_hz * cpu_hz * cycles;
    OverheadTerm::new(scenario.betas[task], time, energy)
}

/// Communication overhead of offloading task `tx` to `rx`: time `I/R`,
/// energy `(||f||^2 + P_c) * I/R`.
pub fn comm_overhead(
    tx: usize,
    rx: usize,
    alloc: &Assignment,
    beams: &BeamformingState,
    scenario: &NetworkScenario,
) -> Result<OverheadTerm> {
    let r = rate(tx, rx, alloc, beams, scenario)?;
    Ok(comm_overhead_from_rate(tx, r, &beams.tx_beams[tx], scenario))
}

/// Communication overhead given a precomputed rate.
pub fn comm_overhead_from_rate(
    tx: usize,
    rate_bps: f64,
    beam: &[C64],
    scenario: &NetworkScenario,
) -> OverheadTerm {
    if rate_bps <= 0.0 {
        return OverheadTerm::INFEASIBLE;
    }
    let time = scenario.task_sizes[tx] / rate_bps;
    let energy = (norm_sq(beam) + scenario.params.circuit_power) * time;
    OverheadTerm::new(scenario.betas[tx], time, energy)
}

/// Total network overhead: local tasks contribute computation only, offloaded
/// tasks contribute communication plus computation at the remote node.
pub fn total_overhead(
    alloc: &AllocationState,
    beams: &BeamformingState,
    scenario: &NetworkScenario,
) -> Result<OverheadReport> {
    let k = alloc.assignment.node_count();
    let mut per_task_comm = vec![OverheadTerm::ZERO; k];
    let mut per_task_comp = vec![OverheadTerm::ZERO; k];
    for task in 0..k {
        let node = alloc.assignment.target(task);
        per_task_comp[task] = comp_overhead(task, node, alloc.cpu[task], scenario);
        if !alloc.assignment.is_local(task) {
            per_task_comm[task] = comm_overhead(task, node, &alloc.assignment, beams, scenario)?;
        }
    }
    Ok(build_report(per_task_comm, per_task_comp))
}

/// Assemble a report from per-task terms, reconciling all totals.
pub fn build_report(
    per_task_comm: Vec<OverheadTerm>,
    per_task_comp: Vec<OverheadTerm>,
) -> OverheadReport {
    let comm_total: f64 = per_task_comm.iter().map(|t| t.overhead).sum();
    let comp_total: f64 = per_task_comp.iter().map(|t| t.overhead).sum();
    let time_total: f64 = per_task_comm
        .iter()
        .zip(&per_task_comp)
        .map(|(a, b)| a.time + b.time)
        .sum();
    let energy_total: f64 = per_task_comm
        .iter()
        .zip(&per_task_comp)
        .map(|(a, b)| a.energy + b.energy)
        .sum();
    let total = comm_total + comp_total;
    let feasible = total.is_finite();
    OverheadReport {
        per_task_comm,
        per_task_comp,
        comm_total,
        comp_total,
        total,
        time_total,
        energy_total,
        feasible,
    }
}
