//! Parameter sweeps: one solve per (axis value, replication, solver).
//!
//! Scenarios are regenerated per (value, replication) from seeds derived off
//! the root seed, so every row is reproducible in isolation and replications
//! never share mutable state. Replication jobs fan out over a thread pool;
//! rows come back sorted by (value, replication, solver). For the
//! `csi_theta` axis, solvers run on distorted channels while the reported
//! overhead is evaluated on the true ones.

use crate::config::{ExperimentConfig, SolverKind, SweepAxis};
use d2d_offload::error::Result;
use d2d_offload::overhead::total_overhead;
use d2d_offload::rng::derive_seed;
use d2d_offload::scenario::{distort_csi, generate_scenario, NetworkScenario, ScenarioParams};
use d2d_offload::solvers::{
    alternate_optimize, equal_cpu_baseline, exhaustive_optimize, local_only, wmmse_baseline,
    Solution, SolverOptions,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// One data row of a sweep.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: f64,
    pub replication: usize,
    pub solver: String,
    pub y_comm: f64,
    pub y_comp: f64,
    pub y_total: f64,
    pub time_total: f64,
    pub energy_total: f64,
    pub runtime_s: f64,
    pub iterations: usize,
    pub feasible: bool,
    /// Non-empty when the solver could not run (e.g. enumeration cap).
    pub note: String,
}

/// Mean/stddev summary over the replications of one (value, solver) cell.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepSummary {
    pub axis: String,
    pub value: f64,
    pub solver: String,
    pub samples: usize,
    pub y_comm_mean: f64,
    pub y_comp_mean: f64,
    pub y_total_mean: f64,
    pub y_total_stddev: f64,
    pub time_total_mean: f64,
    pub energy_total_mean: f64,
    pub runtime_mean_s: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub summaries: Vec<SweepSummary>,
}

pub fn axis_name(axis: SweepAxis) -> &'static str {
    match axis {
        SweepAxis::Nodes => "nodes",
        SweepAxis::Subchannels => "subchannels",
        SweepAxis::Antennas => "antennas",
        SweepAxis::Beta => "beta",
        SweepAxis::CsiTheta => "csi_theta",
        SweepAxis::None => "none",
    }
}

fn apply_axis(base: &ScenarioParams, axis: SweepAxis, value: f64) -> ScenarioParams {
    let mut params = base.clone();
    match axis {
        SweepAxis::Nodes => params.node_count = value.round() as usize,
        SweepAxis::Subchannels => params.subchannel_count = value.round() as usize,
        SweepAxis::Antennas => params.antenna_count = value.round() as usize,
        SweepAxis::Beta => params.overhead_factor = value,
        SweepAxis::CsiTheta | SweepAxis::None => {}
    }
    params
}

/// Run one solver on a scenario, evaluating the report against
/// `eval_scenario` (differs from `solve_scenario` only under CSI distortion).
pub fn run_solver(
    kind: SolverKind,
    solve_scenario: &NetworkScenario,
    eval_scenario: &NetworkScenario,
    seed: u64,
    opts: &SolverOptions,
) -> Result<Solution> {
    let mut solution = match kind {
        SolverKind::Alternate => alternate_optimize(solve_scenario, seed, opts)?,
        SolverKind::Exhaustive => exhaustive_optimize(solve_scenario, seed, opts)?,
        SolverKind::Local => local_only(solve_scenario)?,
        SolverKind::Wmmse => wmmse_baseline(solve_scenario, seed, opts)?,
        SolverKind::EqualCpu => equal_cpu_baseline(solve_scenario, seed, opts)?,
    };
    if !std::ptr::eq(solve_scenario, eval_scenario) {
        solution.report = total_overhead(&solution.alloc, &solution.beams, eval_scenario)?;
    }
    Ok(solution)
}

/// Execute the sweep described by `config`.
///
/// Solver failures become flagged rows (`feasible = false` with a note)
/// rather than aborting the sweep.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    let axis = config.sweep.axis;
    let base = config.scenario.to_params()?;
    let opts = config.solver.to_options();
    let root = config.seed;

    let mut jobs = Vec::new();
    for (value_idx, &value) in config.sweep.values.iter().enumerate() {
        for replication in 0..config.sweep.replications {
            jobs.push((value_idx, value, replication));
        }
    }

    let rows: Vec<Vec<SweepRow>> = jobs
        .par_iter()
        .map(|&(value_idx, value, replication)| {
            sweep_cell(config, &base, &opts, axis, root, value_idx, value, replication)
        })
        .collect::<Result<_>>()?;
    let mut rows: Vec<SweepRow> = rows.into_iter().flatten().collect();
    rows.sort_by(|a, b| {
        a.value
            .partial_cmp(&b.value)
            .unwrap()
            .then(a.replication.cmp(&b.replication))
            .then(a.solver.cmp(&b.solver))
    });

    let summaries = summarize(&rows, axis);
    Ok(SweepResult { rows, summaries })
}

#[allow(clippy::too_many_arguments)]
fn sweep_cell(
    config: &ExperimentConfig,
    base: &ScenarioParams,
    opts: &SolverOptions,
    axis: SweepAxis,
    root: u64,
    value_idx: usize,
    value: f64,
    replication: usize,
) -> Result<Vec<SweepRow>> {
    let params = apply_axis(base, axis, value);
    params.validate()?;
    // Axes that leave the network structure alone (overhead weight, CSI
    // distortion) pair their values on identical scenarios per replication;
    // structural axes get fresh scenarios per (value, replication).
    let structural = matches!(
        axis,
        SweepAxis::Nodes | SweepAxis::Subchannels | SweepAxis::Antennas
    );
    let cell = if structural {
        (value_idx * 100_000 + replication) as u64
    } else {
        replication as u64
    };
    let scenario_seed = derive_seed(root, "sweep-scenario", cell);
    let solver_seed = derive_seed(root, "sweep-solver", cell);
    let scenario = generate_scenario(&params, scenario_seed)?;

    // Under CSI distortion the solvers see perturbed channels; evaluation
    // stays on the truth.
    let solve_scenario = if axis == SweepAxis::CsiTheta && value > 0.0 {
        let distorted = distort_csi(
            &scenario.channels,
            value,
            derive_seed(root, "sweep-csi", (value_idx * 100_000 + replication) as u64),
        )?;
        Some(scenario.with_channels(distorted))
    } else {
        None
    };
    let solve_ref = solve_scenario.as_ref().unwrap_or(&scenario);

    let mut out = Vec::with_capacity(config.sweep.solvers.len());
    for &kind in &config.sweep.solvers {
        let row = match run_solver(kind, solve_ref, &scenario, solver_seed, opts) {
            Ok(solution) => SweepRow {
                axis: axis_name(axis).to_string(),
                value,
                replication,
                solver: kind.name().to_string(),
                y_comm: solution.report.comm_total,
                y_comp: solution.report.comp_total,
                y_total: solution.report.total,
                time_total: solution.report.time_total,
                energy_total: solution.report.energy_total,
                runtime_s: solution.wall_seconds,
                iterations: solution.iterations,
                feasible: solution.report.feasible,
                note: String::new(),
            },
            Err(err) => SweepRow {
                axis: axis_name(axis).to_string(),
                value,
                replication,
                solver: kind.name().to_string(),
                y_comm: f64::NAN,
                y_comp: f64::NAN,
                y_total: f64::NAN,
                time_total: f64::NAN,
                energy_total: f64::NAN,
                runtime_s: 0.0,
                iterations: 0,
                feasible: false,
                note: err.to_string(),
            },
        };
        out.push(row);
    }
    Ok(out)
}

fn summarize(rows: &[SweepRow], axis: SweepAxis) -> Vec<SweepSummary> {
    let mut keys: Vec<(f64, String)> = Vec::new();
    for r in rows {
        let key = (r.value, r.solver.clone());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.iter()
        .map(|(value, solver)| {
            let cell: Vec<&SweepRow> = rows
                .iter()
                .filter(|r| r.value == *value && &r.solver == solver && r.feasible)
                .collect();
            let n = cell.len().max(1) as f64;
            let mean = |f: fn(&SweepRow) -> f64| cell.iter().map(|r| f(r)).sum::<f64>() / n;
            let y_mean = mean(|r| r.y_total);
            let var = cell
                .iter()
                .map(|r| (r.y_total - y_mean) * (r.y_total - y_mean))
                .sum::<f64>()
                / n;
            SweepSummary {
                axis: axis_name(axis).to_string(),
                value: *value,
                solver: solver.clone(),
                samples: cell.len(),
                y_comm_mean: mean(|r| r.y_comm),
                y_comp_mean: mean(|r| r.y_comp),
                y_total_mean: y_mean,
                y_total_stddev: var.sqrt(),
                time_total_mean: mean(|r| r.time_total),
                energy_total_mean: mean(|r| r.energy_total),
                runtime_mean_s: mean(|r| r.runtime_s),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SweepConfig;

    fn tiny_config() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.scenario.node_count = 3;
        cfg.scenario.antenna_count = 2;
        cfg.scenario.subchannel_count = 1;
        cfg.solver.restarts = 2;
        cfg.seed = 5;
        cfg
    }

    #[test]
    fn none_axis_single_local_run_emits_one_row() {
        let mut cfg = tiny_config();
        cfg.sweep = SweepConfig {
            axis: SweepAxis::None,
            values: vec![0.0],
            replications: 1,
            solvers: vec![SolverKind::Local],
        };
        let result = run_sweep(&cfg).unwrap();
        assert_eq!(result.rows.len(), 1);
        assert_eq!(result.rows[0].solver, "local");
        assert!(result.rows[0].feasible);
        assert_eq!(result.summaries.len(), 1);
        assert_eq!(result.summaries[0].samples, 1);
    }

    #[test]
    fn row_counts_multiply_out() {
        let mut cfg = tiny_config();
        cfg.sweep = SweepConfig {
            axis: SweepAxis::Nodes,
            values: vec![2.0, 3.0],
            replications: 2,
            solvers: vec![SolverKind::Alternate, SolverKind::Local],
        };
        let result = run_sweep(&cfg).unwrap();
        assert_eq!(result.rows.len(), 2 * 2 * 2);
        assert_eq!(result.summaries.len(), 2 * 2);
        // Alternate never loses to local on the same scenario.
        for v in [2.0, 3.0] {
            for rep in 0..2 {
                let y = |name: &str| {
                    result
                        .rows
                        .iter()
                        .find(|r| r.value == v && r.replication == rep && r.solver == name)
                        .unwrap()
                        .y_total
                };
                assert!(y("alternate") <= y("local") * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn sweep_is_reproducible() {
        // Everything except wall-clock timing is a pure function of the
        // configuration and root seed.
        let strip_timing = |rows: &[SweepRow]| {
            let mut rows = rows.to_vec();
            for r in rows.iter_mut() {
                r.runtime_s = 0.0;
            }
            serde_json::to_string(&rows).unwrap()
        };
        let cfg = tiny_config();
        let a = run_sweep(&cfg).unwrap();
        let b = run_sweep(&cfg).unwrap();
        assert_eq!(strip_timing(&a.rows), strip_timing(&b.rows));
    }

    #[test]
    fn enumeration_cap_becomes_flagged_row() {
        let mut cfg = tiny_config();
        cfg.scenario.node_count = 12;
        cfg.scenario.subchannel_count = 2;
        cfg.solver.enumeration_cap = 1000;
        cfg.sweep = SweepConfig {
            axis: SweepAxis::None,
            values: vec![0.0],
            replications: 1,
            solvers: vec![SolverKind::Exhaustive, SolverKind::Local],
        };
        let result = run_sweep(&cfg).unwrap();
        let exhaustive = result.rows.iter().find(|r| r.solver == "exhaustive").unwrap();
        assert!(!exhaustive.feasible);
        assert!(exhaustive.note.contains("exceeds cap"));
        let local = result.rows.iter().find(|r| r.solver == "local").unwrap();
        assert!(local.feasible);
    }

    #[test]
    fn csi_axis_evaluates_on_true_channels() {
        let mut cfg = tiny_config();
        cfg.scenario.node_count = 4;
        cfg.scenario.antenna_count = 3;
        cfg.sweep = SweepConfig {
            axis: SweepAxis::CsiTheta,
            values: vec![0.0, 0.5],
            replications: 2,
            solvers: vec![SolverKind::Alternate, SolverKind::Local],
        };
        let result = run_sweep(&cfg).unwrap();
        // Local processing never touches channels, so its totals agree
        // between theta = 0 and theta = 0.5 replication by replication.
        for rep in 0..2 {
            let at = |v: f64| {
                result
                    .rows
                    .iter()
                    .find(|r| r.value == v && r.replication == rep && r.solver == "local")
                    .unwrap()
                    .y_total
            };
            assert_eq!(at(0.0), at(0.5));
        }
    }
}
