//! Runtime growth of the alternate optimizer over the network size.
//!
//! Measures the median wall-clock time of a solve per node count, normalizes
//! to the smallest count, and fits a log-log slope. The solver is injectable
//! so instrumentation can be validated against a constant-time stub.

use crate::config::ExperimentConfig;
use d2d_offload::error::Result;
use d2d_offload::rng::derive_seed;
use d2d_offload::scenario::{generate_scenario, NetworkScenario, ScenarioParams};
use d2d_offload::solvers::alternate_optimize;
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RuntimeRow {
    pub nodes: usize,
    pub median_seconds: f64,
    /// Median runtime divided by the smallest node count's median.
    pub normalized: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RuntimeResult {
    pub rows: Vec<RuntimeRow>,
    /// Least-squares slope of ln(runtime) against ln(nodes).
    pub loglog_slope: f64,
}

/// Measure the real alternate optimizer.
pub fn runtime_growth(config: &ExperimentConfig) -> Result<RuntimeResult> {
    let opts = config.solver.to_options();
    runtime_growth_with(config, |scenario, seed| {
        alternate_optimize(scenario, seed, &opts).map(|_| ())
    })
}

/// Measure an arbitrary solver callback (used to validate the harness with a
/// constant-work stub).
pub fn runtime_growth_with<F>(config: &ExperimentConfig, solver: F) -> Result<RuntimeResult>
where
    F: Fn(&NetworkScenario, u64) -> Result<()>,
{
    config.validate()?;
    let base = config.scenario.to_params()?;
    let root = config.seed;
    let reps = config.runtime.replications.max(1);

    let mut rows = Vec::with_capacity(config.runtime.node_values.len());
    for (vi, &nodes) in config.runtime.node_values.iter().enumerate() {
        let params = ScenarioParams {
            node_count: nodes,
            ..base.clone()
        };
        let mut samples = Vec::with_capacity(reps);
        for rep in 0..reps {
            let cell = (vi * 1000 + rep) as u64;
            let scenario =
                generate_scenario(&params, derive_seed(root, "runtime-scenario", cell))?;
            let start = Instant::now();
            solver(&scenario, derive_seed(root, "runtime-solver", cell))?;
            samples.push(start.elapsed().as_secs_f64());
        }
        samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = samples[samples.len() / 2];
        rows.push(RuntimeRow {
            nodes,
            median_seconds: median,
            normalized: 0.0,
        });
    }

    let reference = rows[0].median_seconds.max(1e-12);
    for row in rows.iter_mut() {
        row.normalized = row.median_seconds / reference;
    }

    let loglog_slope = fit_loglog_slope(
        &rows.iter().map(|r| r.nodes as f64).collect::<Vec<_>>(),
        &rows
            .iter()
            .map(|r| r.median_seconds.max(1e-12))
            .collect::<Vec<_>>(),
    );
    Ok(RuntimeResult { rows, loglog_slope })
}

/// Least-squares slope of ln(y) on ln(x).
pub fn fit_loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_fit_recovers_known_exponents() {
        let x = [4.0, 8.0, 16.0, 32.0];
        let quadratic: Vec<f64> = x.iter().map(|v| 0.3 * v * v).collect();
        assert!((fit_loglog_slope(&x, &quadratic) - 2.0).abs() < 1e-9);
        let cubic: Vec<f64> = x.iter().map(|v| 1e-4 * v * v * v).collect();
        assert!((fit_loglog_slope(&x, &cubic) - 3.0).abs() < 1e-9);
    }

    #[test]
    fn constant_time_stub_fits_flat_slope() {
        let mut cfg = ExperimentConfig::default();
        cfg.runtime.node_values = vec![2, 4, 8];
        cfg.runtime.replications = 3;
        cfg.scenario.antenna_count = 2;
        // Fixed busy-work independent of the scenario size.
        let result = runtime_growth_with(&cfg, |_scenario, seed| {
            let mut acc = seed;
            for i in 0..2_000_000u64 {
                acc = acc.wrapping_mul(6364136223846793005).wrapping_add(i);
            }
            assert!(acc != 1);
            Ok(())
        })
        .unwrap();
        assert!(
            result.loglog_slope.abs() <= 0.1,
            "stub slope {}",
            result.loglog_slope
        );
        assert_eq!(result.rows[0].normalized, 1.0);
    }
}
