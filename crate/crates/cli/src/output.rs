//! Result emission: CSV and JSON writers with stable column schemas.

use crate::queue::FrameRow;
use crate::runtime::RuntimeResult;
use crate::sweep::SweepResult;
use anyhow::Result;
use d2d_offload::solvers::Solution;
use std::io::Write;
use std::path::Path;

/// Flat per-solution CSV: aggregate columns followed by per-task overhead
/// columns (`comm_k`, `comp_k` for each task k).
pub fn write_report_csv<W: Write>(
    mut w: W,
    scenario_id: &str,
    solution: &Solution,
) -> Result<()> {
    let k = solution.report.per_task_comm.len();
    let mut header = vec![
        "scenario_id".to_string(),
        "solver".to_string(),
        "y_comm".to_string(),
        "y_comp".to_string(),
        "y_total".to_string(),
        "time_total".to_string(),
        "energy_total".to_string(),
    ];
    for task in 0..k {
        header.push(format!("comm_{task}"));
        header.push(format!("comp_{task}"));
    }
    writeln!(w, "{}", header.join(","))?;
    let mut row = vec![
        scenario_id.to_string(),
        solution.solver.clone(),
        solution.report.comm_total.to_string(),
        solution.report.comp_total.to_string(),
        solution.report.total.to_string(),
        solution.report.time_total.to_string(),
        solution.report.energy_total.to_string(),
    ];
    for task in 0..k {
        row.push(solution.report.per_task_comm[task].overhead.to_string());
        row.push(solution.report.per_task_comp[task].overhead.to_string());
    }
    writeln!(w, "{}", row.join(","))?;
    Ok(())
}

pub fn write_sweep_csv<W: Write>(mut w: W, result: &SweepResult) -> Result<()> {
    writeln!(
        w,
        "axis,value,replication,solver,y_comm,y_comp,y_total,time_total,energy_total,runtime_s,iterations,feasible,note"
    )?;
    for r in &result.rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.axis,
            r.value,
            r.replication,
            r.solver,
            r.y_comm,
            r.y_comp,
            r.y_total,
            r.time_total,
            r.energy_total,
            r.runtime_s,
            r.iterations,
            r.feasible,
            r.note.replace(',', ";")
        )?;
    }
    Ok(())
}

pub fn write_sweep_summary_csv<W: Write>(mut w: W, result: &SweepResult) -> Result<()> {
    writeln!(
        w,
        "axis,value,solver,samples,y_comm_mean,y_comp_mean,y_total_mean,y_total_stddev,time_total_mean,energy_total_mean,runtime_mean_s"
    )?;
    for s in &result.summaries {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            s.axis,
            s.value,
            s.solver,
            s.samples,
            s.y_comm_mean,
            s.y_comp_mean,
            s.y_total_mean,
            s.y_total_stddev,
            s.time_total_mean,
            s.energy_total_mean,
            s.runtime_mean_s
        )?;
    }
    Ok(())
}

pub fn write_queue_csv<W: Write>(mut w: W, rows: &[FrameRow]) -> Result<()> {
    writeln!(w, "frame,active_nodes,y_alternate,y_local,reduction_pct")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.frame, r.active_nodes, r.y_alternate, r.y_local, r.reduction_pct
        )?;
    }
    Ok(())
}

pub fn write_runtime_csv<W: Write>(mut w: W, result: &RuntimeResult) -> Result<()> {
    writeln!(w, "nodes,median_seconds,normalized")?;
    for r in &result.rows {
        writeln!(w, "{},{},{}", r.nodes, r.median_seconds, r.normalized)?;
    }
    writeln!(w, "# loglog_slope,{}", result.loglog_slope)?;
    Ok(())
}

/// Per-iteration beamforming trace (objective and multiplier drift).
pub fn write_convergence_csv<W: Write>(
    mut w: W,
    trace: &d2d_offload::beamforming::ConvergenceTrace,
) -> Result<()> {
    writeln!(w, "iteration,objective,system_error")?;
    for (i, rho) in trace.objective.iter().enumerate() {
        let zeta = if i == 0 {
            String::new()
        } else {
            trace.system_error[i - 1].to_string()
        };
        writeln!(w, "{i},{rho},{zeta}")?;
    }
    Ok(())
}

/// One row per committed greedy step.
pub fn write_greedy_trace_csv<W: Write>(
    mut w: W,
    trace: &[d2d_offload::topology::GreedyTraceRow],
) -> Result<()> {
    writeln!(
        w,
        "step,transmitter,receiver,subchannel,benefit,y_comm,y_comp,y_total"
    )?;
    for (i, r) in trace.iter().enumerate() {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            i + 1,
            r.transmitter,
            r.receiver,
            r.subchannel,
            r.benefit,
            r.comm_total,
            r.comp_total,
            r.total
        )?;
    }
    Ok(())
}

pub fn write_file(path: &Path, content: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, content)?;
    Ok(())
}
