//! Communication-overhead-minimizing coordinated beamforming.
//!
//! For a fixed task assignment and subchannel allocation, the transmit
//! beamformers and receive combiners are optimized to minimize the total
//! communication overhead `sum_k (1 - beta_k + beta_k*||f_k||^2 + beta_k*P_c)
//! * I_k / R_k`. The rate is replaced by a concave surrogate
//! `u = (W/ln 2) * (-e/w - ln w + 1)` whose maximum over the combiner and the
//! auxiliary `w` recovers the exact rate under an MMSE combiner; the sum of
//! ratios is handled with fixed-point multipliers `lambda = I/u` and
//! `gamma = g/u`. Each block update is exact:
//!
//! * combiners: MMSE solution of a Hermitian positive definite system,
//! * `w`: the current MSE,
//! * beamformers: a per-transmitter QCQP under the power budget, solved in
//!   closed form through an eigendecomposition plus a multiplier bisection.
//!
//! One iteration runs block-coordinate descent on the fixed-multiplier
//! objective `sum_k lambda_k (g_k - gamma_k u_k)` -- all beamformers, then
//! all combiners, then all `w`, repeated until that objective settles -- and
//! then refreshes the multipliers once. Refreshing only after the inner
//! problem is solved keeps the fixed-point iteration fast (a single
//! interleaved pass per refresh contracts an order of magnitude slower on
//! interference-coupled instances). The trace records the surrogate
//! objective `rho = sum_k I_k * gamma_k` (the surrogate image of the
//! communication overhead) and the multiplier drift
//! `zeta = sum_k (dlambda^2 + dgamma^2)` per iteration; iteration stops when
//! both settle below the tolerance.

use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, hermitian_eigen, norm_sq, vdot, C64, CMat};
use crate::overhead::{Assignment, BeamformingState};
use crate::scenario::NetworkScenario;
use serde::{Deserialize, Serialize};

/// Floor used when a stream's surrogate rate collapses to zero or below
/// (dead channel or zero beamformer): the multipliers are computed from this
/// value instead and the event is counted in the trace.
const DEGENERATE_RATE_FLOOR: f64 = 1e-12;

/// Cap on block-coordinate passes per multiplier refresh.
const INNER_MAX_PASSES: usize = 30;

/// Options for a beamforming run.
#[derive(Clone, Debug)]
pub struct BeamformingOptions {
    pub max_iters: usize,
    pub tolerance: f64,
    /// Replace every node's overhead factor inside the surrogate (the
    /// reported overhead still uses the true factors). `Some(0.0)` yields the
    /// pure time-minimizing (weighted-MMSE style) beamformer.
    pub beta_override: Option<f64>,
}

impl Default for BeamformingOptions {
    fn default() -> Self {
        Self {
            max_iters: 200,
            tolerance: 1e-4,
            beta_override: None,
        }
    }
}

/// Why a run stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    /// Objective change and multiplier drift both fell below tolerance.
    Tolerance,
    MaxIterations,
    /// No active transmitters.
    Empty,
}

/// Per-run convergence record.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    /// Surrogate objective per pass; index 0 is the value at initialization.
    pub objective: Vec<f64>,
    /// Multiplier drift per pass (aligned with `objective[1..]`).
    pub system_error: Vec<f64>,
    pub iterations: usize,
    pub terminated_by: Termination,
    pub degenerate_streams: usize,
    pub regularized_solves: usize,
}

impl ConvergenceTrace {
    fn empty() -> Self {
        Self {
            objective: Vec::new(),
            system_error: Vec::new(),
            iterations: 0,
            terminated_by: Termination::Empty,
            degenerate_streams: 0,
            regularized_solves: 0,
        }
    }
}

/// Transmit-power cost factor `g = 1 - beta + beta*||f||^2 + beta*P_c`.
pub fn power_cost(beam: &[C64], beta: f64, circuit_power: f64) -> f64 {
    1.0 - beta + beta * norm_sq(beam) + beta * circuit_power
}

/// MMSE combiner for the stream of task `tx`: `z = J^{-1} H f` where `J`
/// sums the signal covariance of every transmitter active on the stream's
/// subchannel plus the noise covariance.
pub fn mmse_combiner(
    tx: usize,
    alloc: &Assignment,
    tx_beams: &[Vec<C64>],
    scenario: &NetworkScenario,
) -> Result<Vec<C64>> {
    let noise = scenario.params.noise_power;
    if noise <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "noise power must be > 0, got {noise}"
        )));
    }
    let rx = alloc.target(tx);
    let sub = alloc
        .subchannel(tx)
        .ok_or_else(|| Error::InvalidState(format!("task {tx} is not transmitting")))?;
    let n = scenario.antenna_count();
    let mut j = CMat::zeros(n, n);
    for other in alloc.co_channel_transmitters(sub) {
        let hf = scenario.channels.gain(other, rx, sub).mul_vec(&tx_beams[other]);
        j.add_outer(&hf, 1.0);
    }
    j.add_scaled_identity(noise);
    let hf = scenario.channels.gain(tx, rx, sub).mul_vec(&tx_beams[tx]);
    cholesky_solve(&j, &hf)
        .ok_or_else(|| Error::InvalidState("receive covariance not positive definite".into()))
}

/// Mean square error of the stream of task `tx` under the given combiner:
/// `|1 - z^H H f|^2 + z^H (interference + noise) z`.
pub fn stream_mse(
    tx: usize,
    alloc: &Assignment,
    tx_beams: &[Vec<C64>],
    combiner: &[C64],
    scenario: &NetworkScenario,
) -> f64 {
    let rx = alloc.target(tx);
    let sub = alloc.subchannel(tx).expect("active stream");
    let hf = scenario.channels.gain(tx, rx, sub).mul_vec(&tx_beams[tx]);
    let direct = C64::new(1.0, 0.0) - vdot(combiner, &hf);
    let mut e = direct.norm_sqr() + scenario.params.noise_power * norm_sq(combiner);
    for other in alloc.co_channel_transmitters(sub) {
        if other == tx {
            continue;
        }
        let hfo = scenario.channels.gain(other, rx, sub).mul_vec(&tx_beams[other]);
        e += vdot(combiner, &hfo).norm_sqr();
    }
    e
}

/// Concave rate surrogate `(W/ln 2) * (-e/w - ln w + 1)`, in bits/second.
///
/// Over `w` it is maximized at `w = e`, where it equals `-W log2(e)` -- the
/// exact achievable rate when `e` is the MSE of an MMSE combiner.
pub fn surrogate_rate(mse: f64, w: f64, bandwidth: f64) -> Result<f64> {
    if mse <= 0.0 || !mse.is_finite() {
        return Err(Error::InvalidParameter(format!("mse must be > 0, got {mse}")));
    }
    if w <= 0.0 || !w.is_finite() {
        return Err(Error::InvalidParameter(format!("w must be > 0, got {w}")));
    }
    Ok(bandwidth / std::f64::consts::LN_2 * (-mse / w - w.ln() + 1.0))
}

/// Fixed-point multipliers of one stream: `lambda = I/u`, `gamma = g/u`.
///
/// A non-positive surrogate rate marks the stream degenerate and is an error
/// here; the iteration clamps instead (see `DEGENERATE_RATE_FLOOR`).
pub fn stream_weights(
    tx: usize,
    surrogate: f64,
    beam: &[C64],
    beta: f64,
    circuit_power: f64,
    task_bits: f64,
) -> Result<(f64, f64)> {
    if surrogate <= 0.0 {
        return Err(Error::DegenerateStream {
            stream: tx,
            value: surrogate,
        });
    }
    let g = power_cost(beam, beta, circuit_power);
    Ok((task_bits / surrogate, g / surrogate))
}

/// One transmitter's quadratic subproblem: minimize
/// `quad_weight*||f||^2 - 2*linear_scale*Re[gain^H f] + f^H interference f`
/// subject to `||f||^2 <= power_budget`.
#[derive(Clone, Debug)]
pub struct BeamformerSubproblem {
    /// `lambda * beta` of the owning stream.
    pub quad_weight: f64,
    /// `lambda * gamma / w` of the owning stream, in rate-scaled units.
    pub linear_scale: f64,
    /// Weighted co-channel combiner outer products (Hermitian PSD).
    pub interference: CMat,
    pub power_budget: f64,
}

/// Diagonalized form of the power curve `||f(nu)||^2 =
/// scale_sq * sum_m gain_sq[m] / (eigenvalues[m] + nu)^2`, which strictly
/// decreases in `nu` whenever any `gain_sq[m] > 0`.
#[derive(Clone, Debug)]
pub struct PowerProfile {
    pub scale_sq: f64,
    pub eigenvalues: Vec<f64>,
    pub gain_sq: Vec<f64>,
}

impl PowerProfile {
    pub fn power(&self, nu: f64) -> f64 {
        self.scale_sq
            * self
                .eigenvalues
                .iter()
                .zip(&self.gain_sq)
                .map(|(&l, &g)| g / ((l + nu) * (l + nu)))
                .sum::<f64>()
    }
}

/// Eigendecomposition of the shifted quadratic term, with the projected gain.
///
/// Returns the profile, the eigenvector basis, and whether a rank-deficiency
/// regularization (`+1e-12 I`) was applied.
pub fn qcqp_power_profile(
    sub: &BeamformerSubproblem,
    gain: &[C64],
) -> (PowerProfile, CMat, bool) {
    debug_assert!(sub.interference.is_hermitian(1e-10 * (1.0 + sub.interference.frob_norm_sq().sqrt())));
    let mut m = sub.interference.clone();
    m.add_scaled_identity(sub.quad_weight);
    let (mut eigenvalues, basis) = hermitian_eigen(&m);
    // The interference term is positive semidefinite, so every eigenvalue of
    // the shifted matrix is >= quad_weight up to eigensolver noise (which is
    // relative to the matrix scale); clamp the undershoot away.
    for l in eigenvalues.iter_mut() {
        *l = l.max(sub.quad_weight);
    }
    let mut regularized = false;
    let scale = eigenvalues.last().copied().unwrap_or(0.0).max(1.0);
    if eigenvalues[0] < 1e-12 * scale {
        let shift = 1e-12 * scale;
        for l in eigenvalues.iter_mut() {
            *l += shift;
        }
        regularized = true;
    }
    let projected = basis.mulh_vec(gain);
    let gain_sq: Vec<f64> = projected.iter().map(|x| x.norm_sqr()).collect();
    (
        PowerProfile {
            scale_sq: sub.linear_scale * sub.linear_scale,
            eigenvalues,
            gain_sq,
        },
        basis,
        regularized,
    )
}

/// Closed-form QCQP solution `f(nu) = linear_scale * (M + nu I)^{-1} gain`
/// with `M = interference + quad_weight*I`: the unconstrained stationary
/// point if it fits the power budget, otherwise the point on the power
/// sphere found by bisecting the multiplier on the monotone power curve.
pub fn solve_beamformer_qcqp(sub: &BeamformerSubproblem, gain: &[C64]) -> Vec<C64> {
    let (f, _) = solve_beamformer_qcqp_flagged(sub, gain);
    f
}

fn solve_beamformer_qcqp_flagged(sub: &BeamformerSubproblem, gain: &[C64]) -> (Vec<C64>, bool) {
    let (profile, basis, regularized) = qcqp_power_profile(sub, gain);
    let budget = sub.power_budget;
    let constrained = profile.power(0.0) > budget;
    let nu = if !constrained {
        0.0
    } else {
        let total_gain: f64 = profile.gain_sq.iter().sum();
        let mut hi = (profile.scale_sq * total_gain / budget).sqrt();
        while profile.power(hi) > budget {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let p = profile.power(mid);
            if p > budget {
                lo = mid;
            } else {
                hi = mid;
            }
            if (p - budget).abs() <= 1e-12 * budget {
                break;
            }
        }
        0.5 * (lo + hi)
    };
    let projected = basis.mulh_vec(gain);
    let coeffs: Vec<C64> = projected
        .iter()
        .zip(&profile.eigenvalues)
        .map(|(&phi, &l)| phi * (sub.linear_scale / (l + nu)))
        .collect();
    let mut f = basis.mul_vec(&coeffs);
    let p = norm_sq(&f);
    // At a binding constraint the optimum lies exactly on the power sphere;
    // close the residual bisection gap from either side.
    if (constrained && p > 0.0) || p > budget {
        crate::linalg::scale(&mut f, (budget / p).sqrt());
    }
    (f, regularized)
}

/// Objective of the per-transmitter subproblem at a given beamformer.
pub fn qcqp_objective(sub: &BeamformerSubproblem, gain: &[C64], f: &[C64]) -> f64 {
    let quad = sub.quad_weight * norm_sq(f);
    let linear = -2.0 * sub.linear_scale * vdot(gain, f).re;
    let sf = sub.interference.mul_vec(f);
    let inter = vdot(f, &sf).re;
    quad + linear + inter
}

struct StreamContext {
    tx: usize,
    rx: usize,
    sub: usize,
    beta: f64,
}

/// Coordinated beamforming for every active stream of the assignment.
///
/// `tx_beams_init` must hold a full-power beamformer for every node
/// (`||f||^2 = power_budget`); idle nodes keep their vector untouched.
/// Returns the final state and the convergence trace.
pub fn optimize_beamformers(
    alloc: &Assignment,
    scenario: &NetworkScenario,
    tx_beams_init: &[Vec<C64>],
    opts: &BeamformingOptions,
) -> Result<(BeamformingState, ConvergenceTrace)> {
    let streams: Vec<StreamContext> = alloc
        .streams()
        .into_iter()
        .map(|(tx, rx, sub)| StreamContext {
            tx,
            rx,
            sub,
            beta: opts.beta_override.unwrap_or(scenario.betas[tx]),
        })
        .collect();

    let mut state = BeamformingState::from_beams(tx_beams_init.to_vec());
    if streams.is_empty() {
        return Ok((state, ConvergenceTrace::empty()));
    }

    let budget = scenario.params.power_budget;
    let bits = &scenario.task_sizes;
    let circuit = scenario.params.circuit_power;
    let bandwidth = scenario.params.bandwidth;
    let rate_scale = bandwidth / std::f64::consts::LN_2;

    // Clamp any over-budget initial beamformer onto the power sphere.
    for s in &streams {
        let p = norm_sq(&state.tx_beams[s.tx]);
        if p > budget {
            crate::linalg::scale(&mut state.tx_beams[s.tx], (budget / p).sqrt());
        }
    }

    let mut degenerate = 0usize;
    let mut regularized = 0usize;

    // Combiner and MSE auxiliary blocks: exact per-stream optima given f.
    let update_combiners = |state: &mut BeamformingState| -> Result<()> {
        for s in &streams {
            let z = mmse_combiner(s.tx, alloc, &state.tx_beams, scenario)?;
            let e = stream_mse(s.tx, alloc, &state.tx_beams, &z, scenario);
            state.combiners[s.tx] = Some(z);
            state.mse_weights[s.tx] = e;
        }
        Ok(())
    };

    // Multiplier refresh at the current (f, z, w).
    let update_weights = |state: &mut BeamformingState, degenerate: &mut usize| -> Result<()> {
        for s in &streams {
            let u = -rate_scale * state.mse_weights[s.tx].ln();
            let u_eff = if u <= 0.0 {
                *degenerate += 1;
                DEGENERATE_RATE_FLOOR
            } else {
                u
            };
            let (lambda, gamma) = stream_weights(
                s.tx,
                u_eff,
                &state.tx_beams[s.tx],
                s.beta,
                circuit,
                bits[s.tx],
            )?;
            state.lambda[s.tx] = lambda;
            state.gamma[s.tx] = gamma;
        }
        Ok(())
    };

    // Beamformer block: each subproblem depends only on the combiners,
    // auxiliaries, and multipliers, so all transmitters update at once.
    let update_beams = |state: &mut BeamformingState, regularized: &mut usize| {
        let mut new_beams: Vec<(usize, Vec<C64>)> = Vec::with_capacity(streams.len());
        for s in &streams {
            let n = scenario.antenna_count();
            let mut interference = CMat::zeros(n, n);
            for other in &streams {
                if other.sub != s.sub {
                    continue;
                }
                let z = state.combiners[other.tx].as_ref().expect("combiner set");
                let h = scenario.channels.gain(s.tx, other.rx, other.sub);
                let hz = h.mulh_vec(z);
                let q = state.lambda[other.tx] * state.gamma[other.tx] * rate_scale
                    / state.mse_weights[other.tx];
                interference.add_outer(&hz, q);
            }
            interference.hermitize();
            let z_own = state.combiners[s.tx].as_ref().expect("combiner set");
            let gain = scenario.channels.gain(s.tx, s.rx, s.sub).mulh_vec(z_own);
            let sub = BeamformerSubproblem {
                quad_weight: state.lambda[s.tx] * s.beta,
                linear_scale: state.lambda[s.tx] * state.gamma[s.tx] * rate_scale
                    / state.mse_weights[s.tx],
                interference,
                power_budget: budget,
            };
            let (f, was_regularized) = solve_beamformer_qcqp_flagged(&sub, &gain);
            if was_regularized {
                *regularized += 1;
            }
            new_beams.push((s.tx, f));
        }
        for (tx, f) in new_beams {
            state.tx_beams[tx] = f;
        }
    };

    // Fixed-multiplier objective sum_k lambda_k (g_k - gamma_k u_k).
    let weighted_objective = |state: &BeamformingState| -> f64 {
        streams
            .iter()
            .map(|s| {
                let g = power_cost(&state.tx_beams[s.tx], s.beta, circuit);
                let u = -rate_scale * state.mse_weights[s.tx].ln();
                state.lambda[s.tx] * (g - state.gamma[s.tx] * u)
            })
            .sum()
    };

    update_combiners(&mut state)?;
    update_weights(&mut state, &mut degenerate)?;

    let objective_of = |state: &BeamformingState| -> f64 {
        streams.iter().map(|s| bits[s.tx] * state.gamma[s.tx]).sum()
    };

    let mut trace = ConvergenceTrace {
        objective: vec![objective_of(&state)],
        system_error: Vec::new(),
        iterations: 0,
        terminated_by: Termination::MaxIterations,
        degenerate_streams: 0,
        regularized_solves: 0,
    };

    let inner_tolerance = 0.01 * opts.tolerance;
    for _iter in 1..=opts.max_iters {
        // Solve the fixed-multiplier problem by block-coordinate descent
        // until its objective settles, then refresh the multipliers once.
        let mut inner_prev = f64::INFINITY;
        for _pass in 0..INNER_MAX_PASSES {
            update_beams(&mut state, &mut regularized);
            update_combiners(&mut state)?;
            let inner = weighted_objective(&state);
            if (inner_prev - inner).abs() <= inner_tolerance {
                break;
            }
            inner_prev = inner;
        }

        let prev_lambda = state.lambda.clone();
        let prev_gamma = state.gamma.clone();
        update_weights(&mut state, &mut degenerate)?;

        let rho = objective_of(&state);
        let zeta: f64 = streams
            .iter()
            .map(|s| {
                let dl = state.lambda[s.tx] - prev_lambda[s.tx];
                let dg = state.gamma[s.tx] - prev_gamma[s.tx];
                dl * dl + dg * dg
            })
            .sum();
        let prev_rho = *trace.objective.last().unwrap();
        trace.objective.push(rho);
        trace.system_error.push(zeta);
        trace.iterations += 1;
        if (rho - prev_rho).abs() <= opts.tolerance && zeta <= opts.tolerance {
            trace.terminated_by = Termination::Tolerance;
            break;
        }
    }
    trace.degenerate_streams = degenerate;
    trace.regularized_solves = regularized;
    Ok((state, trace))
}

/// Rebuild a self-consistent beamforming state for an assignment from bare
/// transmit beamformers: MMSE combiners, `w` at the MSE, and multipliers at
/// their fixed-point values. Used to finalize a solution for reporting.
pub fn finalize_beamforming(
    alloc: &Assignment,
    tx_beams: &[Vec<C64>],
    scenario: &NetworkScenario,
) -> Result<BeamformingState> {
    let mut state = BeamformingState::from_beams(tx_beams.to_vec());
    let rate_scale = scenario.params.bandwidth / std::f64::consts::LN_2;
    for (tx, _rx, _sub) in alloc.streams() {
        let z = mmse_combiner(tx, alloc, &state.tx_beams, scenario)?;
        let e = stream_mse(tx, alloc, &state.tx_beams, &z, scenario);
        state.combiners[tx] = Some(z);
        state.mse_weights[tx] = e;
        let u = (-rate_scale * e.ln()).max(DEGENERATE_RATE_FLOOR);
        let (lambda, gamma) = stream_weights(
            tx,
            u,
            &state.tx_beams[tx],
            scenario.betas[tx],
            scenario.params.circuit_power,
            scenario.task_sizes[tx],
        )?;
        state.lambda[tx] = lambda;
        state.gamma[tx] = gamma;
    }
    Ok(state)
}
