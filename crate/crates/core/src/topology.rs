//! Greedy task assignment, subchannel allocation, and CPU allocation.
//!
//! Starting from an empty commitment set, each step evaluates every feasible
//! candidate stream `(k, k', i)` and commits the one with the largest
//! offloading benefit -- the drop in total network overhead between "both
//! endpoints process locally" and "k offloads to k' on subchannel i", with
//! CPU shares re-solved for the affected receivers and MMSE combiners
//! recomputed for every stream on the touched subchannel (including the
//! interference the candidate inflicts on already-committed streams).
//! Transmit beamformers are held fixed for the whole pass; the outer solver
//! refreshes them between passes. The pass ends when no candidate improves
//! the total, and every remaining node processes locally.

use crate::cpu::{equal_cpu_allocation, optimal_cpu_allocation, CpuSubproblem, CpuTask};
use crate::error::Result;
use crate::linalg::{cholesky_solve, norm_sq, vdot, C64, CMat};
use crate::overhead::{comm_overhead_from_rate, Assignment, AllocationState, OverheadTerm};
use crate::scenario::NetworkScenario;
use serde::{Deserialize, Serialize};
use std::cell::Cell;
use std::collections::BTreeSet;

/// How CPU shares are solved inside benefit evaluation and materialization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CpuPolicy {
    Optimal,
    EqualSplit,
}

/// One committed step of the greedy pass.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GreedyTraceRow {
    pub transmitter: usize,
    pub receiver: usize,
    pub subchannel: usize,
    pub benefit: f64,
    /// Totals after the commit, counting not-yet-assigned nodes as local.
    pub comm_total: f64,
    pub comp_total: f64,
    pub total: f64,
}

/// Result of one greedy pass.
#[derive(Clone, Debug)]
pub struct GreedyOutcome {
    pub alloc: AllocationState,
    pub trace: Vec<GreedyTraceRow>,
    /// Number of offloading-benefit evaluations performed.
    pub candidate_evaluations: usize,
}

/// Working state of a greedy pass over one scenario.
pub struct GreedyState<'a> {
    scenario: &'a NetworkScenario,
    tx_beams: &'a [Vec<C64>],
    cpu_policy: CpuPolicy,
    /// Nodes whose task is not yet assigned (the candidate transmitter set).
    unassigned: BTreeSet<usize>,
    /// Committed processing node per task.
    target: Vec<Option<usize>>,
    /// Committed subchannel per offloaded task.
    subchannel: Vec<Option<usize>>,
    /// Tasks committed at each receiver (the receiver's own task included).
    receiver_tasks: Vec<Vec<usize>>,
    /// Whether `(receiver, subchannel)` already hears a committed stream.
    busy: Vec<Vec<bool>>,
    /// Committed signal covariance per `(node, subchannel)`:
    /// `sum_m H_{m,node} f_m f_m^H H_{m,node}^H` over committed streams `m`.
    interference: Vec<Vec<CMat>>,
    /// Communication overhead of each committed stream.
    comm_cost: Vec<Option<OverheadTerm>>,
    /// Computation objective and shares per receiver for its committed set.
    comp_cost: Vec<f64>,
    comp_shares: Vec<Vec<f64>>,
    /// Single-task local computation objective per node.
    lone_comp: Vec<f64>,
    evaluations: Cell<usize>,
}

impl<'a> GreedyState<'a> {
    pub fn new(
        scenario: &'a NetworkScenario,
        tx_beams: &'a [Vec<C64>],
        cpu_policy: CpuPolicy,
    ) -> Result<Self> {
        let k = scenario.node_count();
        let s = scenario.subchannel_count();
        let n = scenario.antenna_count();
        let mut lone_comp = Vec::with_capacity(k);
        for node in 0..k {
            let sub = lone_subproblem(scenario, node);
            lone_comp.push(solve_comp(&sub, cpu_policy)?.0);
        }
        Ok(Self {
            scenario,
            tx_beams,
            cpu_policy,
            unassigned: (0..k).collect(),
            target: vec![None; k],
            subchannel: vec![None; k],
            receiver_tasks: vec![Vec::new(); k],
            busy: vec![vec![false; s]; k],
            interference: vec![vec![CMat::zeros(n, n); s]; k],
            comm_cost: vec![None; k],
            comp_cost: vec![0.0; k],
            comp_shares: vec![Vec::new(); k],
            lone_comp,
            evaluations: Cell::new(0),
        })
    }

    pub fn candidate_evaluations(&self) -> usize {
        self.evaluations.get()
    }

    fn is_fresh(&self, node: usize) -> bool {
        self.unassigned.contains(&node)
    }

    /// All candidate streams satisfying the assignment constraints on top of
    /// the committed sets: the transmitter is still unassigned, the receiver
    /// either is unassigned or already processes its own task locally, and no
    /// committed transmitter to that receiver occupies the subchannel.
    pub fn feasible_candidates(&self) -> Vec<(usize, usize, usize)> {
        let k = self.scenario.node_count();
        let s = self.scenario.subchannel_count();
        let mut out = Vec::new();
        for &tx in &self.unassigned {
            for rx in 0..k {
                if rx == tx {
                    continue;
                }
                let eligible = self.is_fresh(rx) || self.target[rx] == Some(rx);
                if !eligible {
                    continue;
                }
                for sub in 0..s {
                    if !self.busy[rx][sub] {
                        out.push((tx, rx, sub));
                    }
                }
            }
        }
        out
    }

    /// Computation objective at `rx` if it additionally hosts `extra_task`
    /// (plus its own task when still unassigned).
    fn comp_with_extra(&self, rx: usize, extra_task: usize) -> f64 {
        let mut ids = self.receiver_tasks[rx].clone();
        if self.is_fresh(rx) {
            ids.push(rx);
        }
        ids.push(extra_task);
        let sub = subproblem_for(self.scenario, rx, &ids);
        match solve_comp(&sub, self.cpu_policy) {
            Ok((objective, _)) => objective,
            Err(_) => f64::INFINITY,
        }
    }

    /// Rate of a committed or candidate stream under MMSE combining, with
    /// the committed co-channel covariance plus an optional extra transmitter.
    fn mmse_rate(&self, tx: usize, rx: usize, sub: usize, extra_tx: Option<usize>) -> f64 {
        let scenario = self.scenario;
        let mut j = self.interference[rx][sub].clone();
        if let Some(e) = extra_tx {
            let hf = scenario.channels.gain(e, rx, sub).mul_vec(&self.tx_beams[e]);
            j.add_outer(&hf, 1.0);
        }
        j.add_scaled_identity(scenario.params.noise_power);
        let hf = scenario.channels.gain(tx, rx, sub).mul_vec(&self.tx_beams[tx]);
        let Some(z) = cholesky_solve(&j, &hf) else {
            return 0.0;
        };
        // With the MMSE combiner, 1 + SINR = 1 / (1 - f^H H^H J^{-1} H f).
        let t = vdot(&hf, &z).re.clamp(0.0, 1.0 - 1e-15);
        -scenario.params.bandwidth * (1.0 - t).log2()
    }

    /// Rate of the candidate stream itself: its own signal is not part of
    /// the committed covariance, so `J = committed + own + noise`.
    fn candidate_rate(&self, tx: usize, rx: usize, sub: usize) -> f64 {
        let scenario = self.scenario;
        let mut j = self.interference[rx][sub].clone();
        let hf = scenario.channels.gain(tx, rx, sub).mul_vec(&self.tx_beams[tx]);
        j.add_outer(&hf, 1.0);
        j.add_scaled_identity(scenario.params.noise_power);
        let Some(z) = cholesky_solve(&j, &hf) else {
            return 0.0;
        };
        let t = vdot(&hf, &z).re.clamp(0.0, 1.0 - 1e-15);
        -scenario.params.bandwidth * (1.0 - t).log2()
    }

    /// Streams committed on a subchannel, ascending by transmitter.
    fn committed_on(&self, sub: usize) -> Vec<(usize, usize)> {
        (0..self.scenario.node_count())
            .filter_map(|tx| {
                (self.subchannel[tx] == Some(sub)).then(|| (tx, self.target[tx].unwrap()))
            })
            .collect()
    }

    /// Offloading benefit of a feasible candidate: the total-overhead change
    /// between assigning both endpoints locally and committing the stream.
    /// `-inf` marks a candidate whose link cannot carry the task.
    pub fn offloading_benefit(&self, (tx, rx, sub): (usize, usize, usize)) -> f64 {
        self.evaluations.set(self.evaluations.get() + 1);
        let scenario = self.scenario;

        // Local branch: both endpoints at their lone-local optimum (the
        // receiver only if it is not yet committed somewhere).
        let mut local_side = self.lone_comp[tx] + self.comp_cost[rx];
        if self.is_fresh(rx) {
            local_side += self.lone_comp[rx];
        }

        // Offload branch, computation: receiver re-splits its CPU.
        let comp_new = self.comp_with_extra(rx, tx);
        if !comp_new.is_finite() {
            return f64::NEG_INFINITY;
        }

        // Offload branch, communication on the touched subchannel.
        let mut comm_old = 0.0;
        let mut comm_new = 0.0;
        for (m, m_rx) in self.committed_on(sub) {
            comm_old += self.comm_cost[m].as_ref().expect("committed stream").overhead;
            let r = self.mmse_rate(m, m_rx, sub, Some(tx));
            let term = comm_overhead_from_rate(m, r, &self.tx_beams[m], scenario);
            if !term.is_finite() {
                return f64::NEG_INFINITY;
            }
            comm_new += term.overhead;
        }
        let cand_rate = self.candidate_rate(tx, rx, sub);
        let cand = comm_overhead_from_rate(tx, cand_rate, &self.tx_beams[tx], scenario);
        if !cand.is_finite() {
            return f64::NEG_INFINITY;
        }
        comm_new += cand.overhead;

        (local_side + comm_old) - (comp_new + comm_new)
    }

    /// Commit a candidate: update the assignment sets, the per-subchannel
    /// covariance caches, the touched stream costs, and the receiver's CPU
    /// split.
    fn commit(&mut self, (tx, rx, sub): (usize, usize, usize)) {
        let scenario = self.scenario;
        self.unassigned.remove(&tx);
        self.target[tx] = Some(rx);
        self.subchannel[tx] = Some(sub);
        if self.unassigned.remove(&rx) {
            self.target[rx] = Some(rx);
            self.receiver_tasks[rx].push(rx);
        }
        self.receiver_tasks[rx].push(tx);
        self.busy[rx][sub] = true;

        // Every node's committed covariance on this subchannel gains the new
        // transmitter (any node may later become a receiver there).
        for node in 0..scenario.node_count() {
            let hf = scenario.channels.gain(tx, node, sub).mul_vec(&self.tx_beams[tx]);
            self.interference[node][sub].add_outer(&hf, 1.0);
        }

        // Refresh communication costs of every stream on the subchannel.
        for (m, m_rx) in self.committed_on(sub) {
            let r = self.mmse_rate(m, m_rx, sub, None);
            self.comm_cost[m] = Some(comm_overhead_from_rate(m, r, &self.tx_beams[m], scenario));
        }

        // Re-split the receiver's CPU over its committed tasks.
        let ids = self.receiver_tasks[rx].clone();
        let subproblem = subproblem_for(scenario, rx, &ids);
        let (objective, shares) =
            solve_comp(&subproblem, self.cpu_policy).expect("committed CPU split");
        self.comp_cost[rx] = objective;
        self.comp_shares[rx] = shares;
    }

    fn totals(&self) -> (f64, f64) {
        let comm: f64 = self
            .comm_cost
            .iter()
            .flatten()
            .map(|t| t.overhead)
            .sum();
        let committed_comp: f64 = self.comp_cost.iter().sum();
        let pending: f64 = self.unassigned.iter().map(|&k| self.lone_comp[k]).sum();
        (comm, committed_comp + pending)
    }

    /// Materialize the committed sets (remaining nodes local) into a full
    /// allocation.
    fn materialize(&self) -> Result<AllocationState> {
        let scenario = self.scenario;
        let k = scenario.node_count();
        let mut target = Vec::with_capacity(k);
        let mut cpu = vec![0.0; k];
        for node in 0..k {
            target.push(self.target[node].unwrap_or(node));
        }
        for rx in 0..k {
            for (task, share) in self.receiver_tasks[rx].iter().zip(&self.comp_shares[rx]) {
                cpu[*task] = *share;
            }
        }
        for &node in &self.unassigned {
            let sub = lone_subproblem(scenario, node);
            let (_, shares) = solve_comp(&sub, self.cpu_policy)?;
            cpu[node] = shares[0];
        }
        let assignment = Assignment::new(target, self.subchannel.clone(), scenario.subchannel_count())?;
        AllocationState::new(assignment, cpu, scenario)
    }
}

fn subproblem_for(scenario: &NetworkScenario, rx: usize, task_ids: &[usize]) -> CpuSubproblem {
    CpuSubproblem {
        receiver: rx,
        capacity: scenario.cpus[rx],
        energy_coefficient: scenario.params.energy_coefficient,
        tasks: task_ids
            .iter()
            .map(|&t| CpuTask {
                id: t,
                beta: scenario.betas[t],
                density: scenario.params.processing_density,
                size_bits: scenario.task_sizes[t],
            })
            .collect(),
    }
}

fn lone_subproblem(scenario: &NetworkScenario, node: usize) -> CpuSubproblem {
    subproblem_for(scenario, node, &[node])
}

fn solve_comp(sub: &CpuSubproblem, policy: CpuPolicy) -> Result<(f64, Vec<f64>)> {
    let shares = match policy {
        CpuPolicy::Optimal => optimal_cpu_allocation(sub)?,
        CpuPolicy::EqualSplit => equal_cpu_allocation(sub)?,
    };
    Ok((sub.objective(&shares), shares))
}

/// Run one greedy pass under fixed transmit beamformers.
///
/// `tx_beams` must provide a beamformer for every node. Ties between equal
/// benefits break toward the lexicographically smallest `(tx, rx, sub)`.
pub fn greedy_allocate(
    scenario: &NetworkScenario,
    tx_beams: &[Vec<C64>],
    cpu_policy: CpuPolicy,
) -> Result<GreedyOutcome> {
    debug_assert_eq!(tx_beams.len(), scenario.node_count());
    debug_assert!(tx_beams
        .iter()
        .all(|f| norm_sq(f) <= scenario.params.power_budget * (1.0 + 1e-6)));
    let mut state = GreedyState::new(scenario, tx_beams, cpu_policy)?;
    let mut trace = Vec::new();
    loop {
        let mut best: Option<((usize, usize, usize), f64)> = None;
        for cand in state.feasible_candidates() {
            let benefit = state.offloading_benefit(cand);
            if best.as_ref().map_or(true, |&(_, b)| benefit > b) {
                best = Some((cand, benefit));
            }
        }
        match best {
            Some((cand, benefit)) if benefit > 0.0 => {
                state.commit(cand);
                let (comm, comp) = state.totals();
                trace.push(GreedyTraceRow {
                    transmitter: cand.0,
                    receiver: cand.1,
                    subchannel: cand.2,
                    benefit,
                    comm_total: comm,
                    comp_total: comp,
                    total: comm + comp,
                });
            }
            _ => break,
        }
    }
    Ok(GreedyOutcome {
        alloc: state.materialize()?,
        candidate_evaluations: state.candidate_evaluations(),
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beamforming::finalize_beamforming;
    use crate::overhead::total_overhead;
    use crate::rng;
    use crate::scenario::{generate_scenario, ChannelSet, ScenarioParams};

    fn full_power_beams(scenario: &NetworkScenario, seed: u64) -> Vec<Vec<C64>> {
        let mut rng = rng::substream(seed, "greedy-test-beams", 0);
        (0..scenario.node_count())
            .map(|_| {
                rng::complex_sphere_point(
                    &mut rng,
                    scenario.antenna_count(),
                    scenario.params.power_budget.sqrt(),
                )
            })
            .collect()
    }

    #[test]
    fn fresh_state_candidate_count_is_k_km1_s() {
        let params = ScenarioParams {
            node_count: 3,
            subchannel_count: 2,
            antenna_count: 2,
            ..ScenarioParams::default()
        };
        let s = generate_scenario(&params, 1).unwrap();
        let beams = full_power_beams(&s, 1);
        let state = GreedyState::new(&s, &beams, CpuPolicy::Optimal).unwrap();
        assert_eq!(state.feasible_candidates().len(), 3 * 2 * 2);
    }

    #[test]
    fn committed_stream_restricts_candidates() {
        let params = ScenarioParams {
            node_count: 3,
            subchannel_count: 2,
            antenna_count: 2,
            ..ScenarioParams::default()
        };
        let s = generate_scenario(&params, 2).unwrap();
        let beams = full_power_beams(&s, 2);
        let mut state = GreedyState::new(&s, &beams, CpuPolicy::Optimal).unwrap();
        state.commit((0, 1, 0));
        let cands = state.feasible_candidates();
        // Only node 2 can still transmit; node 0 is offloaded elsewhere so it
        // is not an eligible receiver; receiver 1 is blocked on subchannel 0.
        assert!(cands.iter().all(|&(tx, _, _)| tx == 2));
        assert!(!cands.contains(&(2, 2, 0)));
        assert!(!cands.contains(&(2, 0, 0)));
        assert!(!cands.contains(&(2, 0, 1)));
        assert!(!cands.contains(&(2, 1, 0)));
        assert!(cands.contains(&(2, 1, 1)));
        assert_eq!(cands.len(), 1);
    }

    #[test]
    fn zero_channels_reject_everything() {
        let params = ScenarioParams {
            node_count: 4,
            subchannel_count: 2,
            antenna_count: 3,
            ..ScenarioParams::default()
        };
        let mut s = generate_scenario(&params, 3).unwrap();
        s.channels = ChannelSet::zeros(4, 2, 3);
        let beams = full_power_beams(&s, 3);
        let state = GreedyState::new(&s, &beams, CpuPolicy::Optimal).unwrap();
        for cand in state.feasible_candidates() {
            assert_eq!(state.offloading_benefit(cand), f64::NEG_INFINITY);
        }
        let out = greedy_allocate(&s, &beams, CpuPolicy::Optimal).unwrap();
        assert!(out.trace.is_empty());
        assert!((0..4).all(|k| out.alloc.assignment.is_local(k)));
        assert!((0..4).all(|k| out.alloc.assignment.subchannel(k).is_none()));
    }

    /// Two identical nodes with ample CPU: offloading only adds communication
    /// overhead, so the benefit can never be positive.
    #[test]
    fn ample_cpu_makes_offloading_useless() {
        let params = ScenarioParams {
            node_count: 2,
            subchannel_count: 1,
            antenna_count: 3,
            ..ScenarioParams::default()
        };
        let mut s = generate_scenario(&params, 4).unwrap();
        let ample = 10.0 * crate::cpu::unconstrained_cpu_min(0.5, s.params.energy_coefficient).unwrap();
        s.cpus = vec![ample; 2];
        s.task_sizes = vec![4e6; 2];
        let beams = full_power_beams(&s, 4);
        let state = GreedyState::new(&s, &beams, CpuPolicy::Optimal).unwrap();
        for cand in state.feasible_candidates() {
            let benefit = state.offloading_benefit(cand);
            assert!(benefit <= 0.0, "candidate {cand:?} has benefit {benefit}");
        }
    }

    /// Resource-poor node next to a resource-rich node over a strong channel:
    /// offloading pays off and the greedy commits exactly that stream.
    #[test]
    fn rich_neighbor_attracts_offload() {
        let params = ScenarioParams {
            node_count: 2,
            subchannel_count: 1,
            antenna_count: 3,
            distance_range: (10.0, 10.0),
            ..ScenarioParams::default()
        };
        let mut s = generate_scenario(&params, 5).unwrap();
        s.cpus = vec![0.1e9, 1e9];
        s.task_sizes = vec![8e6, 1e6];
        let beams = full_power_beams(&s, 5);
        let state = GreedyState::new(&s, &beams, CpuPolicy::Optimal).unwrap();
        let benefit = state.offloading_benefit((0, 1, 0));
        assert!(benefit > 0.0, "expected positive benefit, got {benefit}");

        let out = greedy_allocate(&s, &beams, CpuPolicy::Optimal).unwrap();
        assert_eq!(out.trace.len(), 1);
        assert_eq!(out.alloc.assignment.target(0), 1);
        assert_eq!(out.alloc.assignment.subchannel(0), Some(0));
        assert!(out.alloc.assignment.is_local(1));
    }

    #[test]
    fn greedy_totals_fall_by_exactly_the_benefit() {
        let params = ScenarioParams {
            node_count: 10,
            subchannel_count: 2,
            antenna_count: 5,
            ..ScenarioParams::default()
        };
        for seed in 0..5u64 {
            let s = generate_scenario(&params, seed).unwrap();
            let beams = full_power_beams(&s, seed);
            let out = greedy_allocate(&s, &beams, CpuPolicy::Optimal).unwrap();
            // The all-local starting total.
            let state = GreedyState::new(&s, &beams, CpuPolicy::Optimal).unwrap();
            let mut prev: f64 = (0..10).map(|k| state.lone_comp[k]).sum();
            for row in &out.trace {
                assert!(row.benefit > 0.0);
                assert!(
                    (prev - row.benefit - row.total).abs() <= 1e-9 * prev.abs(),
                    "total {} != previous {} - benefit {}",
                    row.total,
                    prev,
                    row.benefit
                );
                assert!(row.total < prev);
                prev = row.total;
            }
        }
    }

    #[test]
    fn greedy_dominates_all_local() {
        let params = ScenarioParams {
            node_count: 8,
            subchannel_count: 2,
            antenna_count: 5,
            ..ScenarioParams::default()
        };
        for seed in 0..5u64 {
            let s = generate_scenario(&params, seed).unwrap();
            let beams = full_power_beams(&s, seed + 100);
            let out = greedy_allocate(&s, &beams, CpuPolicy::Optimal).unwrap();
            let bf = finalize_beamforming(&out.alloc.assignment, &beams, &s).unwrap();
            let total = total_overhead(&out.alloc, &bf, &s).unwrap().total;

            let local_state = GreedyState::new(&s, &beams, CpuPolicy::Optimal).unwrap();
            let local_total: f64 = (0..8).map(|k| local_state.lone_comp[k]).sum();
            assert!(total <= local_total * (1.0 + 1e-9));
        }
    }

    #[test]
    fn evaluation_count_respects_cubic_bound() {
        for (k, subs) in [(5usize, 1usize), (5, 2), (10, 1), (10, 2)] {
            let params = ScenarioParams {
                node_count: k,
                subchannel_count: subs,
                antenna_count: 3,
                ..ScenarioParams::default()
            };
            let s = generate_scenario(&params, 7).unwrap();
            let beams = full_power_beams(&s, 7);
            let out = greedy_allocate(&s, &beams, CpuPolicy::Optimal).unwrap();
            let bound = (k - 1) * k * (k + 1) * subs / 2;
            assert!(
                out.candidate_evaluations <= bound,
                "K={k} S={subs}: {} evaluations > bound {bound}",
                out.candidate_evaluations
            );
        }
    }

    #[test]
    fn equal_split_policy_is_used_when_requested() {
        let params = ScenarioParams {
            node_count: 2,
            subchannel_count: 1,
            antenna_count: 3,
            distance_range: (10.0, 10.0),
            ..ScenarioParams::default()
        };
        let mut s = generate_scenario(&params, 9).unwrap();
        s.cpus = vec![0.1e9, 1e9];
        s.task_sizes = vec![8e6, 1e6];
        let beams = full_power_beams(&s, 9);
        let out = greedy_allocate(&s, &beams, CpuPolicy::EqualSplit).unwrap();
        if out.alloc.assignment.target(0) == 1 {
            // Equal split across the two tasks at node 1.
            assert!((out.alloc.cpu[0] - 0.5e9).abs() < 1.0);
            assert!((out.alloc.cpu[1] - 0.5e9).abs() < 1.0);
        }
        // A lone local node under the equal policy takes its whole CPU.
        let params1 = ScenarioParams {
            node_count: 1,
            ..params
        };
        let s1 = generate_scenario(&params1, 9).unwrap();
        let beams1 = full_power_beams(&s1, 9);
        let out1 = greedy_allocate(&s1, &beams1, CpuPolicy::EqualSplit).unwrap();
        assert_eq!(out1.alloc.cpu[0], s1.cpus[0]);
    }
}
