//! Batch CLI for D2D offloading experiments.
//!
//! Subcommands: `generate` (scenario JSON), `solve` (one scenario, one
//! solver), `sweep`, `queue-sim`, `runtime`. Failures print a
//! machine-readable JSON object on stderr and exit nonzero.

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use d2d_offload::rng::derive_seed;
use d2d_offload::scenario::{generate_scenario, scenario_from_json, scenario_to_json};
use d2d_sim::config::{ExperimentConfig, SolverKind, SweepAxis};
use d2d_sim::output;
use d2d_sim::queue::queue_simulation;
use d2d_sim::runtime::runtime_growth;
use d2d_sim::sweep::{run_solver, run_sweep};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "d2d-sim",
    about = "Joint communication/computation overhead optimization for D2D edge networks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration file (JSON); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed, overriding the configuration file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; results print to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scenario document.
    Generate {
        #[command(flatten)]
        common: CommonArgs,
        /// Embed the fully materialized channels and draws.
        #[arg(long)]
        channels: bool,
        /// Override the configured node count.
        #[arg(long)]
        nodes: Option<usize>,
    },
    /// Solve one scenario with one solver.
    Solve {
        #[command(flatten)]
        common: CommonArgs,
        /// Scenario document produced by `generate`; when omitted, a
        /// scenario is generated from the configuration and seed.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "alternate")]
        solver: SolverKind,
        /// Distort the channels seen by the solver by this ratio; the report
        /// is still evaluated on the true channels.
        #[arg(long, default_value_t = 0.0)]
        csi_theta: f64,
    },
    /// Run the configured parameter sweep.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Override the sweep axis (nodes|subchannels|antennas|beta|csi_theta|none).
        #[arg(long)]
        axis: Option<SweepAxis>,
        /// Override the sweep values.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        /// Override the replication count.
        #[arg(long)]
        replications: Option<usize>,
        /// Override the solver list.
        #[arg(long, value_enum, value_delimiter = ',')]
        solvers: Option<Vec<SolverKind>>,
    },
    /// Simulate dynamic task generation over optimization frames.
    QueueSim {
        #[command(flatten)]
        common: CommonArgs,
        /// Override the frame count.
        #[arg(long)]
        frames: Option<usize>,
    },
    /// Measure runtime growth of the alternate optimizer over node counts.
    Runtime {
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn load_config(common: &mut CommonArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            ExperimentConfig::from_json(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if common.out.is_none() {
        common.out = cfg.output_dir.as_ref().map(PathBuf::from);
    }
    Ok(cfg)
}

fn emit(common: &CommonArgs, filename: &str, content: String) -> Result<()> {
    match &common.out {
        Some(dir) => {
            let path = dir.join(filename);
            output::write_file(&path, content.as_bytes())?;
            println!("wrote {}", path.display());
        }
        None => print!("{content}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate {
            mut common,
            channels,
            nodes,
        } => {
            let mut cfg = load_config(&mut common)?;
            if let Some(n) = nodes {
                cfg.scenario.node_count = n;
            }
            let params = cfg.scenario.to_params()?;
            let scenario = generate_scenario(&params, cfg.seed)?;
            let json = scenario_to_json(&scenario, channels)?;
            emit(&common, &format!("scenario_{}.json", cfg.seed), json + "\n")?;
        }
        Command::Solve {
            mut common,
            scenario,
            solver,
            csi_theta,
        } => {
            let cfg = load_config(&mut common)?;
            let (truth, scenario_id) = match &scenario {
                Some(path) => {
                    let text = std::fs::read_to_string(path)
                        .with_context(|| format!("reading scenario {}", path.display()))?;
                    let id = path
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_else(|| "scenario".into());
                    (scenario_from_json(&text)?, id)
                }
                None => {
                    let params = cfg.scenario.to_params()?;
                    (
                        generate_scenario(&params, cfg.seed)?,
                        format!("seed-{}", cfg.seed),
                    )
                }
            };
            let opts = cfg.solver.to_options();
            let solver_seed = derive_seed(cfg.seed, "solve-cli", 0);
            let solution = if csi_theta > 0.0 {
                let distorted = d2d_offload::scenario::distort_csi(
                    &truth.channels,
                    csi_theta,
                    derive_seed(cfg.seed, "solve-cli-csi", 0),
                )?;
                let blurred = truth.with_channels(distorted);
                run_solver(solver, &blurred, &truth, solver_seed, &opts)?
            } else {
                run_solver(solver, &truth, &truth, solver_seed, &opts)?
            };
            println!(
                "{} on {}: y_total={:.6} (comm {:.6}, comp {:.6}) in {:.3}s",
                solution.solver,
                scenario_id,
                solution.report.total,
                solution.report.comm_total,
                solution.report.comp_total,
                solution.wall_seconds
            );
            match common.format {
                Format::Json => {
                    let json = serde_json::to_string_pretty(&solution)?;
                    emit(&common, &format!("solution_{scenario_id}.json"), json + "\n")?;
                }
                Format::Csv => {
                    let mut buf = Vec::new();
                    output::write_report_csv(&mut buf, &scenario_id, &solution)?;
                    emit(
                        &common,
                        &format!("report_{scenario_id}.csv"),
                        String::from_utf8(buf)?,
                    )?;
                    if common.out.is_some() {
                        if let Some(trace) = &solution.beamforming_trace {
                            let mut buf = Vec::new();
                            output::write_convergence_csv(&mut buf, trace)?;
                            emit(
                                &common,
                                &format!("trace_beamforming_{scenario_id}.csv"),
                                String::from_utf8(buf)?,
                            )?;
                        }
                        if !solution.greedy_trace.is_empty() {
                            let mut buf = Vec::new();
                            output::write_greedy_trace_csv(&mut buf, &solution.greedy_trace)?;
                            emit(
                                &common,
                                &format!("trace_greedy_{scenario_id}.csv"),
                                String::from_utf8(buf)?,
                            )?;
                        }
                    }
                }
            }
        }
        Command::Sweep {
            mut common,
            axis,
            values,
            replications,
            solvers,
        } => {
            let mut cfg = load_config(&mut common)?;
            if let Some(axis) = axis {
                cfg.sweep.axis = axis;
            }
            if let Some(values) = values {
                cfg.sweep.values = values;
            }
            if let Some(reps) = replications {
                cfg.sweep.replications = reps;
            }
            if let Some(solvers) = solvers {
                cfg.sweep.solvers = solvers;
            }
            let result = run_sweep(&cfg)?;
            match common.format {
                Format::Json => {
                    let json = serde_json::to_string_pretty(&result)?;
                    emit(&common, "sweep.json", json + "\n")?;
                }
                Format::Csv => {
                    let mut rows = Vec::new();
                    output::write_sweep_csv(&mut rows, &result)?;
                    emit(&common, "sweep_rows.csv", String::from_utf8(rows)?)?;
                    let mut summary = Vec::new();
                    output::write_sweep_summary_csv(&mut summary, &result)?;
                    emit(&common, "sweep_summary.csv", String::from_utf8(summary)?)?;
                }
            }
        }
        Command::QueueSim { mut common, frames } => {
            let mut cfg = load_config(&mut common)?;
            if let Some(frames) = frames {
                cfg.queue.frames = frames;
            }
            let rows = queue_simulation(&cfg)?;
            match common.format {
                Format::Json => {
                    let json = serde_json::to_string_pretty(&rows)?;
                    emit(&common, "queue.json", json + "\n")?;
                }
                Format::Csv => {
                    let mut buf = Vec::new();
                    output::write_queue_csv(&mut buf, &rows)?;
                    emit(&common, "queue.csv", String::from_utf8(buf)?)?;
                }
            }
        }
        Command::Runtime { mut common } => {
            let cfg = load_config(&mut common)?;
            let result = runtime_growth(&cfg)?;
            println!("loglog slope: {:.3}", result.loglog_slope);
            match common.format {
                Format::Json => {
                    let json = serde_json::to_string_pretty(&result)?;
                    emit(&common, "runtime.json", json + "\n")?;
                }
                Format::Csv => {
                    let mut buf = Vec::new();
                    output::write_runtime_csv(&mut buf, &result)?;
                    emit(&common, "runtime.csv", String::from_utf8(buf)?)?;
                }
            }
        }
    }
    Ok(())
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help/version requests are not failures.
            if err.use_stderr() {
                eprintln!(
                    "{}",
                    serde_json::json!({"error": {"kind": "usage", "message": err.to_string()}})
                );
                std::process::exit(2);
            }
            err.exit();
        }
    };
    if let Err(err) = run(cli) {
        eprintln!(
            "{}",
            serde_json::json!({"error": {"kind": "runtime", "message": format!("{err:#}")}})
        );
        std::process::exit(1);
    }
}
