//! Per-receiver CPU allocation.
//!
//! A node hosting several tasks splits its CPU to minimize
//! `sum_k ((1-beta_k)/F_k + beta_k*kappa*F_k^2) * mu_k * I_k` subject to
//! `sum_k F_k <= capacity`, `F_k >= F_MIN`. The problem is strictly convex,
//! so the exact solution is either every task at its unconstrained minimizer
//! (capacity slack) or the KKT point where a single multiplier `nu >= 0`
//! makes the shares exactly fill the capacity. Each per-task share at a given
//! `nu` is the unique positive root of a cubic, found by safeguarded Newton;
//! `nu` itself comes from a bisection on the monotone total-use curve.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Floor on the CPU share of an assigned task. A zero share would mean the
/// task never completes, and pure-energy tasks (`beta = 1`) would otherwise
/// drive their share to zero.
pub const MIN_TASK_CPU_HZ: f64 = 1e3;

/// One task assigned to a receiver, as seen by the CPU subproblem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CpuTask {
    pub id: usize,
    pub beta: f64,
    /// Processing density, cycles/bit.
    pub density: f64,
    /// Task size, bits.
    pub size_bits: f64,
}

impl CpuTask {
    pub fn workload_cycles(&self) -> f64 {
        self.density * self.size_bits
    }

    /// Computation overhead contributed by this task at CPU share `f`.
    pub fn overhead(&self, f: f64, kappa: f64) -> f64 {
        if f <= 0.0 {
            return f64::INFINITY;
        }
        ((1.0 - self.beta) / f + self.beta * kappa * f * f) * self.workload_cycles()
    }
}

/// The convex CPU split at one receiver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CpuSubproblem {
    pub receiver: usize,
    /// Available CPU, Hz.
    pub capacity: f64,
    /// Energy coefficient of the receiver, J s^2 / cycles^3.
    pub energy_coefficient: f64,
    pub tasks: Vec<CpuTask>,
}

impl CpuSubproblem {
    pub fn validate(&self) -> Result<()> {
        if self.capacity <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "capacity must be > 0, got {}",
                self.capacity
            )));
        }
        if self.tasks.is_empty() {
            return Err(Error::InvalidParameter("empty task list".into()));
        }
        for t in &self.tasks {
            if !(0.0..=1.0).contains(&t.beta) {
                return Err(Error::InvalidParameter(format!(
                    "task {} has beta {} outside [0,1]",
                    t.id, t.beta
                )));
            }
            if t.density <= 0.0 || t.size_bits <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "task {} has nonpositive workload",
                    t.id
                )));
            }
        }
        Ok(())
    }

    /// Objective value of an allocation (aligned with `self.tasks`).
    pub fn objective(&self, shares: &[f64]) -> f64 {
        self.tasks
            .iter()
            .zip(shares)
            .map(|(t, &f)| t.overhead(f, self.energy_coefficient))
            .sum()
    }
}

/// Minimizer of `(1-beta)/F + beta*kappa*F^2` over `F > 0`:
/// `((1-beta) / (2*beta*kappa))^(1/3)`. The task workload scales the
/// objective but not the minimizer. Callers handle `beta` of exactly 0
/// (no finite minimizer) or 1 (minimizer at zero).
pub fn unconstrained_cpu_min(beta: f64, kappa: f64) -> Result<f64> {
    if !(0.0 < beta && beta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "beta must lie strictly in (0,1), got {beta}"
        )));
    }
    if kappa <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "kappa must be > 0, got {kappa}"
        )));
    }
    Ok(((1.0 - beta) / (2.0 * beta * kappa)).cbrt())
}

/// Per-task share for a given capacity multiplier `nu > 0`: the positive root
/// of `2*beta*kappa*w*F^3 + nu*F^2 - (1-beta)*w = 0` with `w = mu*I`,
/// clamped to the `MIN_TASK_CPU_HZ` floor.
fn share_for_multiplier(task: &CpuTask, kappa: f64, nu: f64) -> f64 {
    let w = task.workload_cycles();
    let a = 2.0 * task.beta * kappa * w;
    let c = (1.0 - task.beta) * w;
    let root = if task.beta >= 1.0 {
        // Energy-only task: stationarity pushes the share to zero.
        0.0
    } else if task.beta <= 0.0 {
        // Time-only task: nu*F^2 = w.
        (c / nu).sqrt()
    } else {
        positive_cubic_root(a, nu, c)
    };
    root.max(MIN_TASK_CPU_HZ)
}

/// Unique positive root of `a*x^3 + b*x^2 - c = 0` with `a, c > 0`, `b >= 0`,
/// via safeguarded Newton with a bisection fallback.
fn positive_cubic_root(a: f64, b: f64, c: f64) -> f64 {
    let p = |x: f64| a * x * x * x + b * x * x - c;
    // Bracket: p(0) = -c < 0; grow hi until positive.
    let mut hi = (c / a).cbrt().max(1.0);
    while p(hi) < 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    let mut x = hi.min((c / a).cbrt());
    for _ in 0..200 {
        let fx = p(x);
        if fx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let dfx = 3.0 * a * x * x + 2.0 * b * x;
        let mut next = if dfx > 0.0 { x - fx / dfx } else { x };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-14 * x.max(1.0) {
            return next;
        }
        x = next;
    }
    x
}

/// Exact solution of the subproblem.
///
/// Returns shares aligned with `sub.tasks`. If the unconstrained minimizers
/// fit within the capacity they are returned directly; otherwise the
/// capacity binds and the KKT multiplier is bisected until the total use
/// matches the capacity within 1e-8 relative.
pub fn optimal_cpu_allocation(sub: &CpuSubproblem) -> Result<Vec<f64>> {
    sub.validate()?;
    let n = sub.tasks.len();
    if sub.capacity < n as f64 * MIN_TASK_CPU_HZ {
        return Err(Error::InfeasibleCpu {
            capacity: sub.capacity,
            tasks: n,
            floor: MIN_TASK_CPU_HZ,
        });
    }
    let kappa = sub.energy_coefficient;

    // Unconstrained branch: every task at its own minimizer, if they fit.
    // beta = 0 has no finite minimizer and forces the KKT branch.
    let mut unconstrained = Vec::with_capacity(n);
    let mut fits = true;
    for t in &sub.tasks {
        if t.beta <= 0.0 {
            fits = false;
            break;
        }
        let f = if t.beta >= 1.0 {
            MIN_TASK_CPU_HZ
        } else {
            unconstrained_cpu_min(t.beta, kappa)?.max(MIN_TASK_CPU_HZ)
        };
        unconstrained.push(f);
    }
    if fits {
        let total: f64 = unconstrained.iter().sum();
        if total <= sub.capacity {
            return Ok(unconstrained);
        }
    }

    // KKT branch: bisect nu so that sum_k F_k(nu) = capacity. The upper
    // bound is the multiplier that pins the most demanding task at the floor,
    // at which point every share is at or below the floor.
    let nu_hi = sub
        .tasks
        .iter()
        .map(|t| {
            let w = t.workload_cycles();
            let f = MIN_TASK_CPU_HZ;
            ((1.0 - t.beta) * w - 2.0 * t.beta * kappa * w * f * f * f) / (f * f)
        })
        .fold(0.0f64, f64::max)
        .max(1e-30);
    let total_at = |nu: f64| -> f64 {
        sub.tasks.iter().map(|t| share_for_multiplier(t, kappa, nu)).sum()
    };

    let mut lo = 0.0;
    let mut hi = nu_hi;
    // Ensure the bracket covers the capacity from both sides.
    while total_at(hi) > sub.capacity {
        hi *= 2.0;
    }
    let mut shares = vec![0.0; n];
    for _ in 0..200 {
        let nu = 0.5 * (lo + hi);
        let total = total_at(nu);
        if total > sub.capacity {
            lo = nu;
        } else {
            hi = nu;
        }
        if (total - sub.capacity).abs() <= 1e-8 * sub.capacity {
            break;
        }
    }
    let nu = 0.5 * (lo + hi);
    for (i, t) in sub.tasks.iter().enumerate() {
        shares[i] = share_for_multiplier(t, kappa, nu);
    }
    // The capacity binds at the optimum of this branch; close the sub-1e-8
    // bisection gap by rescaling the above-floor shares to fill it exactly.
    let floor_total: f64 = shares.iter().filter(|&&f| f <= MIN_TASK_CPU_HZ).sum();
    let adjustable: f64 = shares.iter().filter(|&&f| f > MIN_TASK_CPU_HZ).sum();
    if adjustable > 0.0 {
        let factor = (sub.capacity - floor_total) / adjustable;
        for f in shares.iter_mut() {
            if *f > MIN_TASK_CPU_HZ {
                *f = (*f * factor).max(MIN_TASK_CPU_HZ);
            }
        }
    }
    let total: f64 = shares.iter().sum();
    if total > sub.capacity {
        let largest = shares
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        shares[largest] = (shares[largest] - (total - sub.capacity)).max(MIN_TASK_CPU_HZ);
    }
    Ok(shares)
}

/// Equal-split baseline: `capacity / #tasks` for every assigned task.
pub fn equal_cpu_allocation(sub: &CpuSubproblem) -> Result<Vec<f64>> {
    sub.validate()?;
    let share = sub.capacity / sub.tasks.len() as f64;
    Ok(vec![share; sub.tasks.len()])
}

/// Stationarity residual of one task at `(share, nu)`:
/// `-(1-beta)*w/F^2 + 2*beta*kappa*w*F + nu`. Zero at an interior KKT point.
pub fn kkt_residual(task: &CpuTask, kappa: f64, share: f64, nu: f64) -> f64 {
    let w = task.workload_cycles();
    -(1.0 - task.beta) * w / (share * share) + 2.0 * task.beta * kappa * w * share + nu
}

/// Recover the capacity multiplier implied by a solution (0 when the capacity
/// constraint is slack). Used by tests to verify the KKT system.
pub fn implied_multiplier(sub: &CpuSubproblem, shares: &[f64]) -> f64 {
    let total: f64 = shares.iter().sum();
    if total < sub.capacity * (1.0 - 1e-6) {
        return 0.0;
    }
    // Any task strictly above the floor pins nu via stationarity.
    for (t, &f) in sub.tasks.iter().zip(shares) {
        if f > MIN_TASK_CPU_HZ * (1.0 + 1e-9) {
            return -kkt_residual(t, sub.energy_coefficient, f, 0.0);
        }
    }
    0.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn task(id: usize, beta: f64, size_bits: f64) -> CpuTask {
        CpuTask {
            id,
            beta,
            density: 200.0,
            size_bits,
        }
    }

    fn sub(capacity: f64, tasks: Vec<CpuTask>) -> CpuSubproblem {
        CpuSubproblem {
            receiver: 0,
            capacity,
            energy_coefficient: 3.5e-27,
            tasks,
        }
    }

    /// Brute-force oracle: grid search over the capacity simplex.
    fn grid_best(sub: &CpuSubproblem, steps: usize) -> f64 {
        let n = sub.tasks.len();
        let cap = sub.capacity;
        let step = cap / steps as f64;
        let mut best = f64::INFINITY;
        let mut shares = vec![MIN_TASK_CPU_HZ; n];
        fn recurse(
            sub: &CpuSubproblem,
            level: usize,
            remaining: f64,
            step: f64,
            steps: usize,
            shares: &mut Vec<f64>,
            best: &mut f64,
        ) {
            let n = sub.tasks.len();
            if level == n - 1 {
                shares[level] = remaining.max(MIN_TASK_CPU_HZ);
                if shares[level] <= remaining + 1e-9 {
                    let v = sub.objective(shares);
                    if v < *best {
                        *best = v;
                    }
                }
                return;
            }
            for s in 1..=steps {
                let f = s as f64 * step;
                if f > remaining {
                    break;
                }
                shares[level] = f;
                recurse(sub, level + 1, remaining - f, step, steps, shares, best);
            }
        }
        recurse(sub, 0, cap, step, steps, &mut shares, &mut best);
        best
    }

    #[test]
    fn unconstrained_min_formula() {
        // ((1-b)/(2*b*kappa))^(1/3) at b=0.5, kappa=3.5e-27.
        let f = unconstrained_cpu_min(0.5, 3.5e-27).unwrap();
        assert!((f - 5.228e8).abs() / 5.228e8 < 1e-3);
        // Grid-search oracle over a log-spaced range.
        let t = task(0, 0.5, 1e6);
        let mut best_f = 0.0;
        let mut best = f64::INFINITY;
        for i in 0..40_000 {
            let x = 1e6 * (1e10f64 / 1e6).powf(i as f64 / 39_999.0);
            let v = t.overhead(x, 3.5e-27);
            if v < best {
                best = v;
                best_f = x;
            }
        }
        assert!((f - best_f).abs() / best_f < 1e-3);
        // Doubling kappa divides the minimizer by 2^(1/3).
        let f2 = unconstrained_cpu_min(0.5, 7e-27).unwrap();
        assert!((f / f2 - 2f64.cbrt()).abs() < 1e-12);
        assert!(unconstrained_cpu_min(0.0, 1e-27).is_err());
        assert!(unconstrained_cpu_min(1.0, 1e-27).is_err());
    }

    #[test]
    fn single_task_takes_min_of_unconstrained_and_capacity() {
        // Capacity below the unconstrained minimizer: the whole CPU is used.
        let p = sub(0.2e9, vec![task(0, 0.5, 4e6)]);
        let shares = optimal_cpu_allocation(&p).unwrap();
        assert!((shares[0] - 0.2e9).abs() < 1.0);
        // Ample capacity: the unconstrained minimizer wins.
        let p = sub(2e9, vec![task(0, 0.5, 4e6)]);
        let shares = optimal_cpu_allocation(&p).unwrap();
        let expect = unconstrained_cpu_min(0.5, 3.5e-27).unwrap();
        assert!((shares[0] - expect).abs() / expect < 1e-9);
    }

    #[test]
    fn identical_tasks_split_equally_under_binding_capacity() {
        let p = sub(0.6e9, vec![task(0, 0.5, 4e6), task(1, 0.5, 4e6)]);
        let shares = optimal_cpu_allocation(&p).unwrap();
        assert!((shares[0] - shares[1]).abs() < 1.0);
        assert!((shares[0] + shares[1] - 0.6e9).abs() <= 1e-8 * 0.6e9 + 1.0);
    }

    #[test]
    fn three_task_instance_matches_grid_oracle() {
        let p = sub(
            0.5e9,
            vec![task(0, 0.2, 1e6), task(1, 0.5, 4e6), task(2, 0.8, 8e6)],
        );
        let shares = optimal_cpu_allocation(&p).unwrap();
        let solver_obj = p.objective(&shares);
        // Simplex grid with 1e5 Hz steps.
        let oracle = grid_best(&p, 5000);
        assert!(
            solver_obj <= oracle * (1.0 + 5e-3),
            "solver {solver_obj} vs grid {oracle}"
        );
    }

    #[test]
    fn equal_split_is_dominated_by_optimal() {
        for seed in 0..30u64 {
            let mut rng = crate::rng::substream(seed, "cpu-test", 0);
            use rand::Rng;
            let n = rng.gen_range(1..=4);
            let tasks: Vec<CpuTask> = (0..n)
                .map(|i| task(i, rng.gen_range(0.05..0.95), rng.gen_range(1e6..8e6)))
                .collect();
            let p = sub(rng.gen_range(1e8..1e9), tasks);
            let opt = optimal_cpu_allocation(&p).unwrap();
            let eq = equal_cpu_allocation(&p).unwrap();
            assert!(p.objective(&opt) <= p.objective(&eq) * (1.0 + 1e-9));
        }
    }

    #[test]
    fn equal_split_values() {
        let p = sub(1e9, vec![task(0, 0.5, 1e6)]);
        assert_eq!(equal_cpu_allocation(&p).unwrap(), vec![1e9]);
        let p4 = sub(
            1e9,
            (0..4).map(|i| task(i, 0.5, 1e6)).collect::<Vec<_>>(),
        );
        assert_eq!(equal_cpu_allocation(&p4).unwrap(), vec![0.25e9; 4]);
    }

    #[test]
    fn kkt_conditions_hold() {
        for seed in 0..30u64 {
            let mut rng = crate::rng::substream(seed, "cpu-kkt", 0);
            use rand::Rng;
            let n = rng.gen_range(1..=4);
            let tasks: Vec<CpuTask> = (0..n)
                .map(|i| task(i, rng.gen_range(0.0..=1.0), rng.gen_range(1e6..8e6)))
                .collect();
            let p = sub(rng.gen_range(1e8..1.5e9), tasks);
            let shares = optimal_cpu_allocation(&p).unwrap();
            let total: f64 = shares.iter().sum();
            assert!(total <= p.capacity * (1.0 + 1e-8));
            assert!(shares.iter().all(|&f| f >= MIN_TASK_CPU_HZ));
            let nu = implied_multiplier(&p, &shares);
            assert!(nu >= -1e-12);
            if total < p.capacity * (1.0 - 1e-6) {
                // Slack capacity: every share is its own unconstrained point.
                for (t, &f) in p.tasks.iter().zip(&shares) {
                    if t.beta > 0.0 && t.beta < 1.0 {
                        let expect =
                            unconstrained_cpu_min(t.beta, p.energy_coefficient).unwrap();
                        assert!((f - expect.max(MIN_TASK_CPU_HZ)).abs() / expect < 1e-9);
                    }
                }
            } else {
                for (t, &f) in p.tasks.iter().zip(&shares) {
                    if f > MIN_TASK_CPU_HZ * (1.0 + 1e-9) {
                        let r = kkt_residual(t, p.energy_coefficient, f, nu);
                        assert!(
                            r.abs() <= 1e-6 * nu.abs() + 1e-6,
                            "seed {seed}: residual {r} at nu {nu}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn beta_one_tasks_sit_at_floor() {
        let p = sub(1e9, vec![task(0, 1.0, 4e6)]);
        let shares = optimal_cpu_allocation(&p).unwrap();
        assert_eq!(shares, vec![MIN_TASK_CPU_HZ]);
    }

    #[test]
    fn beta_zero_tasks_fill_capacity() {
        let p = sub(1e9, vec![task(0, 0.0, 4e6), task(1, 0.0, 1e6)]);
        let shares = optimal_cpu_allocation(&p).unwrap();
        let total: f64 = shares.iter().sum();
        assert!((total - 1e9).abs() <= 10.0);
        // Time-only split is proportional to sqrt(workload).
        let ratio = shares[0] / shares[1];
        assert!((ratio - 2.0).abs() < 1e-6);
    }

    #[test]
    fn infeasible_capacity_is_an_error() {
        let p = sub(
            1.5e3,
            vec![task(0, 0.5, 1e6), task(1, 0.5, 1e6)],
        );
        assert!(matches!(
            optimal_cpu_allocation(&p),
            Err(Error::InfeasibleCpu { .. })
        ));
    }
}
