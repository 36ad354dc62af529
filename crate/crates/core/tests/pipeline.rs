//! End-to-end exercises of the public API: scenario round trip, solve,
//! solution serialization, and cross-solver consistency.

use d2d_offload::overhead::total_overhead;
use d2d_offload::scenario::{
    distort_csi, generate_scenario, scenario_from_json, scenario_to_json, ScenarioParams,
};
use d2d_offload::solvers::{
    alternate_optimize, exhaustive_optimize, local_only, Solution, SolverOptions,
};

fn params(nodes: usize, subchannels: usize, antennas: usize) -> ScenarioParams {
    ScenarioParams {
        node_count: nodes,
        subchannel_count: subchannels,
        antenna_count: antennas,
        ..ScenarioParams::default()
    }
}

#[test]
fn generate_solve_serialize_round_trip() {
    let scenario = generate_scenario(&params(5, 2, 3), 77).unwrap();
    // A lean document regenerates bit-identically from (params, seed).
    let lean = scenario_to_json(&scenario, false).unwrap();
    let regenerated = scenario_from_json(&lean).unwrap();
    assert_eq!(scenario, regenerated);

    let opts = SolverOptions {
        restarts: 3,
        ..SolverOptions::default()
    };
    let solution = alternate_optimize(&scenario, 5, &opts).unwrap();
    // Solutions serialize with their full state and deserialize unchanged.
    let json = serde_json::to_string(&solution).unwrap();
    let back: Solution = serde_json::from_str(&json).unwrap();
    assert_eq!(back.alloc, solution.alloc);
    assert_eq!(back.beams, solution.beams);
    assert_eq!(back.report, solution.report);

    // The carried report matches a from-scratch evaluation.
    let recomputed = total_overhead(&back.alloc, &back.beams, &scenario).unwrap();
    assert_eq!(recomputed, solution.report);
}

#[test]
fn solver_chain_holds_on_a_fresh_scenario() {
    let scenario = generate_scenario(&params(4, 1, 3), 2024).unwrap();
    let opts = SolverOptions {
        restarts: 4,
        ..SolverOptions::default()
    };
    let exhaustive = exhaustive_optimize(&scenario, 9, &opts).unwrap();
    let alternate = alternate_optimize(&scenario, 9, &opts).unwrap();
    let local = local_only(&scenario).unwrap();
    assert!(exhaustive.report.total <= alternate.report.total);
    assert!(alternate.report.total <= local.report.total);
}

#[test]
fn distorted_channels_degrade_gracefully() {
    // Solving on distorted channels and evaluating on the truth still beats
    // local processing on a well-connected scenario.
    let scenario = generate_scenario(&params(8, 2, 5), 31).unwrap();
    let distorted = distort_csi(&scenario.channels, 0.5, 99).unwrap();
    let blurred = scenario.with_channels(distorted);
    let opts = SolverOptions {
        restarts: 3,
        ..SolverOptions::default()
    };
    let solution = alternate_optimize(&blurred, 1, &opts).unwrap();
    let on_truth = total_overhead(&solution.alloc, &solution.beams, &scenario).unwrap();
    let local = local_only(&scenario).unwrap();
    assert!(on_truth.feasible);
    assert!(on_truth.total <= local.report.total * 1.05);
}
