//! Experiment configuration: JSON schema and CLI-facing enums.
//!
//! Power-like quantities in the configuration file are written in dBW (the
//! customary unit for these link budgets) and converted to watts once at
//! load time; everything downstream runs in linear units.

use d2d_offload::error::{Error, Result};
use d2d_offload::scenario::{dbw_to_watts, CpuMixture, MixtureComponent, ScenarioParams};
use serde::{Deserialize, Serialize};

/// Scenario block of the configuration file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub node_count: usize,
    pub subchannel_count: usize,
    pub antenna_count: usize,
    pub power_budget_dbw: f64,
    pub noise_power_dbw: f64,
    pub circuit_power_dbw: f64,
    pub bandwidth_hz: f64,
    pub pathloss_ref_db: f64,
    pub pathloss_exponent: f64,
    pub ref_distance_m: f64,
    pub distance_range_m: (f64, f64),
    pub task_size_range_bits: (f64, f64),
    pub processing_density_cycles_per_bit: f64,
    pub energy_coefficient: f64,
    pub cpu_mixture: Vec<CpuComponentConfig>,
    pub overhead_factor: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CpuComponentConfig {
    pub weight: f64,
    pub low_hz: f64,
    pub high_hz: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            node_count: 10,
            subchannel_count: 2,
            antenna_count: 5,
            power_budget_dbw: 3.0,
            noise_power_dbw: -90.0,
            circuit_power_dbw: -20.0,
            bandwidth_hz: 1e6,
            pathloss_ref_db: -30.0,
            pathloss_exponent: 3.5,
            ref_distance_m: 1.0,
            distance_range_m: (10.0, 30.0),
            task_size_range_bits: (1e6, 8e6),
            processing_density_cycles_per_bit: 200.0,
            energy_coefficient: 3.5e-27,
            cpu_mixture: vec![
                CpuComponentConfig {
                    weight: 0.75,
                    low_hz: 1e8,
                    high_hz: 2e8,
                },
                CpuComponentConfig {
                    weight: 0.25,
                    low_hz: 9e8,
                    high_hz: 1e9,
                },
            ],
            overhead_factor: 0.5,
        }
    }
}

impl ScenarioConfig {
    pub fn to_params(&self) -> Result<ScenarioParams> {
        let params = ScenarioParams {
            node_count: self.node_count,
            subchannel_count: self.subchannel_count,
            antenna_count: self.antenna_count,
            power_budget: dbw_to_watts(self.power_budget_dbw),
            noise_power: dbw_to_watts(self.noise_power_dbw),
            circuit_power: dbw_to_watts(self.circuit_power_dbw),
            bandwidth: self.bandwidth_hz,
            pathloss_ref_db: self.pathloss_ref_db,
            pathloss_exponent: self.pathloss_exponent,
            ref_distance: self.ref_distance_m,
            distance_range: self.distance_range_m,
            task_size_range: self.task_size_range_bits,
            processing_density: self.processing_density_cycles_per_bit,
            energy_coefficient: self.energy_coefficient,
            cpu_distribution: CpuMixture {
                components: self
                    .cpu_mixture
                    .iter()
                    .map(|c| MixtureComponent {
                        weight: c.weight,
                        low: c.low_hz,
                        high: c.high_hz,
                    })
                    .collect(),
            },
            overhead_factor: self.overhead_factor,
        };
        params.validate()?;
        Ok(params)
    }
}

/// Which quantity a sweep varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Nodes,
    Subchannels,
    Antennas,
    Beta,
    CsiTheta,
    None,
}

impl std::str::FromStr for SweepAxis {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "nodes" => Ok(Self::Nodes),
            "subchannels" => Ok(Self::Subchannels),
            "antennas" => Ok(Self::Antennas),
            "beta" => Ok(Self::Beta),
            "csi_theta" | "csi-theta" => Ok(Self::CsiTheta),
            "none" => Ok(Self::None),
            other => Err(format!("unknown sweep axis '{other}'")),
        }
    }
}

/// Solvers addressable from configuration and the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
#[clap(rename_all = "kebab-case")]
pub enum SolverKind {
    Alternate,
    Exhaustive,
    Local,
    Wmmse,
    EqualCpu,
}

impl SolverKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Alternate => "alternate",
            Self::Exhaustive => "exhaustive",
            Self::Local => "local",
            Self::Wmmse => "wmmse",
            Self::EqualCpu => "equal-cpu",
        }
    }
}

/// Sweep block.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub replications: usize,
    pub solvers: Vec<SolverKind>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            axis: SweepAxis::None,
            values: vec![0.0],
            replications: 20,
            solvers: vec![SolverKind::Alternate, SolverKind::Local],
        }
    }
}

/// Dynamic-queue simulation block.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct QueueConfig {
    pub max_nodes: usize,
    /// Task arrival rate per node, tasks/second.
    pub arrival_rate: f64,
    /// Optimization frame period, seconds.
    pub frame_period_s: f64,
    pub frames: usize,
    /// Fixed task size used for queued tasks, bits.
    pub task_size_bits: f64,
}

impl Default for QueueConfig {
    fn default() -> Self {
        Self {
            max_nodes: 30,
            arrival_rate: 0.1,
            frame_period_s: 5.0,
            frames: 8,
            task_size_bits: 8e6,
        }
    }
}

impl QueueConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_nodes == 0 {
            return Err(Error::InvalidParameter("queue max_nodes must be >= 1".into()));
        }
        if self.arrival_rate <= 0.0 {
            return Err(Error::InvalidParameter("arrival_rate must be > 0".into()));
        }
        if self.frame_period_s <= 0.0 {
            return Err(Error::InvalidParameter("frame_period_s must be > 0".into()));
        }
        if self.frames == 0 {
            return Err(Error::InvalidParameter("frames must be >= 1".into()));
        }
        if self.task_size_bits <= 0.0 {
            return Err(Error::InvalidParameter("task_size_bits must be > 0".into()));
        }
        Ok(())
    }
}

/// Runtime-growth measurement block.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct RuntimeConfig {
    /// Ascending node counts to time.
    pub node_values: Vec<usize>,
    pub replications: usize,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        Self {
            node_values: vec![4, 8, 16, 32],
            replications: 3,
        }
    }
}

/// Full experiment configuration document.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub sweep: SweepConfig,
    pub queue: QueueConfig,
    pub runtime: RuntimeConfig,
    pub seed: u64,
    pub solver: SolverSettings,
    /// Default output directory; the `--out` flag overrides it.
    pub output_dir: Option<String>,
}

/// Solver tuning carried in the configuration file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub restarts: usize,
    pub epsilon: f64,
    pub max_outer: usize,
    pub beamforming_max_iters: usize,
    pub beamforming_tolerance: f64,
    pub enumeration_cap: u128,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            restarts: 10,
            epsilon: 1e-4,
            max_outer: 20,
            beamforming_max_iters: 200,
            beamforming_tolerance: 1e-4,
            enumeration_cap: 10_000_000,
        }
    }
}

impl SolverSettings {
    pub fn to_options(&self) -> d2d_offload::solvers::SolverOptions {
        d2d_offload::solvers::SolverOptions {
            restarts: self.restarts,
            epsilon: self.epsilon,
            max_outer: self.max_outer,
            beamforming: d2d_offload::beamforming::BeamformingOptions {
                max_iters: self.beamforming_max_iters,
                tolerance: self.beamforming_tolerance,
                beta_override: None,
            },
            enumeration_cap: self.enumeration_cap,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(json: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(json)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.to_params()?;
        if self.sweep.values.is_empty() {
            return Err(Error::InvalidParameter("sweep values must be non-empty".into()));
        }
        if self.sweep.replications == 0 {
            return Err(Error::InvalidParameter("replications must be >= 1".into()));
        }
        if self.sweep.solvers.is_empty() {
            return Err(Error::InvalidParameter("solver list must be non-empty".into()));
        }
        self.queue.validate()?;
        if self.runtime.node_values.is_empty() {
            return Err(Error::InvalidParameter("runtime node_values must be non-empty".into()));
        }
        if !self.runtime.node_values.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidParameter(
                "runtime node_values must be strictly ascending".into(),
            ));
        }
        Ok(())
    }
}
