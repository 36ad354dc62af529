//! Random D2D scenario generation.
//!
//! A scenario bundles the network geometry, per-link Rayleigh MIMO channels,
//! task sizes, and CPU capacities, all drawn deterministically from a 64-bit
//! seed. Power-like quantities are stored in linear units (watts, Hz, bits);
//! dB values are converted once at ingestion.

use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::rng;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// One component of a uniform-mixture distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub low: f64,
    pub high: f64,
}

/// Mixture of uniform components, used for the CPU capacity distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CpuMixture {
    pub components: Vec<MixtureComponent>,
}

impl CpuMixture {
    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::InvalidParameter("empty CPU mixture".into()));
        }
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "CPU mixture weights sum to {total}, expected 1"
            )));
        }
        for c in &self.components {
            if c.weight < 0.0 || c.low <= 0.0 || c.high < c.low {
                return Err(Error::InvalidParameter(
                    "CPU mixture component must have weight >= 0 and 0 < low <= high".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for c in &self.components {
            acc += c.weight;
            if u <= acc {
                return rng.gen_range(c.low..=c.high);
            }
        }
        let last = self.components.last().unwrap();
        rng.gen_range(last.low..=last.high)
    }
}

/// Generation parameters for a network scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    /// Number of nodes K.
    pub node_count: usize,
    /// Number of frequency subchannels S.
    pub subchannel_count: usize,
    /// Antennas per node N (same for transmit and receive).
    pub antenna_count: usize,
    /// Per-node transmit power budget, watts.
    pub power_budget: f64,
    /// Noise power, watts.
    pub noise_power: f64,
    /// Circuit power consumed while transmitting, watts.
    pub circuit_power: f64,
    /// Bandwidth of each subchannel, Hz.
    pub bandwidth: f64,
    /// Path loss in dB at the reference distance.
    pub pathloss_ref_db: f64,
    /// Path loss exponent.
    pub pathloss_exponent: f64,
    /// Reference distance, meters.
    pub ref_distance: f64,
    /// Uniform range for inter-node distances, meters.
    pub distance_range: (f64, f64),
    /// Uniform range for task sizes, bits.
    pub task_size_range: (f64, f64),
    /// Processing density, cycles per bit.
    pub processing_density: f64,
    /// CPU energy coefficient, J * s^2 / cycles^3.
    pub energy_coefficient: f64,
    /// Distribution of per-node CPU capacities, Hz.
    pub cpu_distribution: CpuMixture,
    /// Time/energy overhead weighting factor, applied to every node.
    pub overhead_factor: f64,
}

impl Default for ScenarioParams {
    /// Mobile-computing defaults: 3 dBW power budget, -90 dBW noise,
    /// -20 dBW circuit power, 1 MHz subchannels, 10-30 m links, 1-8 Mbit
    /// tasks, and a bimodal CPU population (three quarters 0.1-0.2 GHz,
    /// one quarter 0.9-1 GHz).
    fn default() -> Self {
        Self {
            node_count: 10,
            subchannel_count: 2,
            antenna_count: 5,
            power_budget: dbw_to_watts(3.0),
            noise_power: dbw_to_watts(-90.0),
            circuit_power: dbw_to_watts(-20.0),
            bandwidth: 1e6,
            pathloss_ref_db: -30.0,
            pathloss_exponent: 3.5,
            ref_distance: 1.0,
            distance_range: (10.0, 30.0),
            task_size_range: (1e6, 8e6),
            processing_density: 200.0,
            energy_coefficient: 3.5e-27,
            cpu_distribution: CpuMixture {
                components: vec![
                    MixtureComponent {
                        weight: 0.75,
                        low: 1e8,
                        high: 2e8,
                    },
                    MixtureComponent {
                        weight: 0.25,
                        low: 9e8,
                        high: 1e9,
                    },
                ],
            },
            overhead_factor: 0.5,
        }
    }
}

impl ScenarioParams {
    pub fn validate(&self) -> Result<()> {
        fn positive(name: &str, v: f64) -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")))
            }
        }
        if self.node_count == 0 {
            return Err(Error::InvalidParameter("node_count must be >= 1".into()));
        }
        if self.subchannel_count == 0 {
            return Err(Error::InvalidParameter("subchannel_count must be >= 1".into()));
        }
        if self.antenna_count == 0 {
            return Err(Error::InvalidParameter("antenna_count must be >= 1".into()));
        }
        positive("power_budget", self.power_budget)?;
        positive("noise_power", self.noise_power)?;
        positive("circuit_power", self.circuit_power)?;
        positive("bandwidth", self.bandwidth)?;
        positive("ref_distance", self.ref_distance)?;
        positive("processing_density", self.processing_density)?;
        positive("energy_coefficient", self.energy_coefficient)?;
        positive("distance_range.low", self.distance_range.0)?;
        positive("task_size_range.low", self.task_size_range.0)?;
        if self.distance_range.1 < self.distance_range.0 {
            return Err(Error::InvalidParameter("distance_range high < low".into()));
        }
        if self.task_size_range.1 < self.task_size_range.0 {
            return Err(Error::InvalidParameter("task_size_range high < low".into()));
        }
        if !(0.0..=1.0).contains(&self.overhead_factor) {
            return Err(Error::InvalidParameter(format!(
                "overhead_factor must lie in [0,1], got {}",
                self.overhead_factor
            )));
        }
        self.cpu_distribution.validate()
    }
}

/// Convert dBW to watts.
pub fn dbw_to_watts(dbw: f64) -> f64 {
    10f64.powf(dbw / 10.0)
}

/// Convert a dB value to a linear power factor.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Log-distance path loss in dB: `ref_db - 10 * exponent * log10(d / d0)`.
pub fn pathloss_db(distance: f64, ref_db: f64, exponent: f64, ref_distance: f64) -> Result<f64> {
    if distance <= 0.0 || !distance.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "distance must be > 0, got {distance}"
        )));
    }
    if ref_distance <= 0.0 || !ref_distance.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "reference distance must be > 0, got {ref_distance}"
        )));
    }
    Ok(ref_db - 10.0 * exponent * (distance / ref_distance).log10())
}

/// Per-link MIMO channel matrices `H[(tx, rx, subchannel)]`, each N x N.
///
/// Self-link slots `(k, k, i)` exist for uniform indexing but hold zero
/// matrices: the model defines no self-distance, and a zero self-channel
/// means a node transmitting and receiving on the same subchannel sees no
/// self-interference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelSet {
    pub node_count: usize,
    pub subchannel_count: usize,
    pub antenna_count: usize,
    matrices: Vec<CMat>,
}

impl ChannelSet {
    pub fn zeros(node_count: usize, subchannel_count: usize, antenna_count: usize) -> Self {
        let n = node_count * node_count * subchannel_count;
        Self {
            node_count,
            subchannel_count,
            antenna_count,
            matrices: vec![CMat::zeros(antenna_count, antenna_count); n],
        }
    }

    fn index(&self, tx: usize, rx: usize, sub: usize) -> usize {
        debug_assert!(tx < self.node_count && rx < self.node_count && sub < self.subchannel_count);
        (tx * self.node_count + rx) * self.subchannel_count + sub
    }

    pub fn gain(&self, tx: usize, rx: usize, sub: usize) -> &CMat {
        &self.matrices[self.index(tx, rx, sub)]
    }

    pub fn gain_mut(&mut self, tx: usize, rx: usize, sub: usize) -> &mut CMat {
        let i = self.index(tx, rx, sub);
        &mut self.matrices[i]
    }
}

/// A fully materialized network scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkScenario {
    pub params: ScenarioParams,
    pub seed: u64,
    /// Symmetric inter-node distances, meters; the diagonal is zero.
    pub distances: Vec<Vec<f64>>,
    /// Task size per node, bits.
    pub task_sizes: Vec<f64>,
    /// CPU capacity per node, Hz.
    pub cpus: Vec<f64>,
    /// Overhead factor per node.
    pub betas: Vec<f64>,
    pub channels: ChannelSet,
}

impl NetworkScenario {
    pub fn node_count(&self) -> usize {
        self.params.node_count
    }

    pub fn subchannel_count(&self) -> usize {
        self.params.subchannel_count
    }

    pub fn antenna_count(&self) -> usize {
        self.params.antenna_count
    }

    /// Linear-scale channel variance for the link `tx -> rx`.
    pub fn link_variance(&self, tx: usize, rx: usize) -> Result<f64> {
        let d = self.distances[tx][rx];
        let db = pathloss_db(
            d,
            self.params.pathloss_ref_db,
            self.params.pathloss_exponent,
            self.params.ref_distance,
        )?;
        Ok(db_to_linear(db))
    }

    /// Replace the channel set (used for imperfect-CSI experiments).
    pub fn with_channels(&self, channels: ChannelSet) -> Self {
        let mut s = self.clone();
        s.channels = channels;
        s
    }
}

/// Draw a scenario from `(params, seed)`.
///
/// Draw order is fixed (distances, task sizes, CPUs, then channels in
/// `(tx, rx, subchannel)` lexicographic order), so a given `(params, seed)`
/// pair always produces a bit-identical scenario. Distances are symmetric;
/// the channel matrices of the two link directions are drawn independently.
pub fn generate_scenario(params: &ScenarioParams, seed: u64) -> Result<NetworkScenario> {
    params.validate()?;
    let k = params.node_count;
    let mut rng = rng::substream(seed, "scenario", 0);

    let mut distances = vec![vec![0.0; k]; k];
    for a in 0..k {
        for b in (a + 1)..k {
            let d = rng.gen_range(params.distance_range.0..=params.distance_range.1);
            distances[a][b] = d;
            distances[b][a] = d;
        }
    }

    let task_sizes: Vec<f64> = (0..k)
        .map(|_| rng.gen_range(params.task_size_range.0..=params.task_size_range.1))
        .collect();
    let cpus: Vec<f64> = (0..k).map(|_| params.cpu_distribution.sample(&mut rng)).collect();
    let betas = vec![params.overhead_factor; k];

    let mut channels = ChannelSet::zeros(k, params.subchannel_count, params.antenna_count);
    for tx in 0..k {
        for rx in 0..k {
            if tx == rx {
                continue;
            }
            let db = pathloss_db(
                distances[tx][rx],
                params.pathloss_ref_db,
                params.pathloss_exponent,
                params.ref_distance,
            )?;
            let variance = db_to_linear(db);
            for sub in 0..params.subchannel_count {
                let m = channels.gain_mut(tx, rx, sub);
                for entry in m.data_mut() {
                    *entry = rng::complex_gaussian(&mut rng, variance);
                }
            }
        }
    }

    Ok(NetworkScenario {
        params: params.clone(),
        seed,
        distances,
        task_sizes,
        cpus,
        betas,
        channels,
    })
}

/// Add complex Gaussian distortion to every channel matrix.
///
/// For a matrix `H`, each entry of the distortion is drawn i.i.d. from
/// CN(0, ratio * ||H||_F^2 / (rows * cols)), i.e. the distortion variance
/// scales with the average entry energy of that matrix. `ratio = 0` returns
/// an identical copy. Deterministic given `(channels, ratio, seed)`.
pub fn distort_csi(channels: &ChannelSet, ratio: f64, seed: u64) -> Result<ChannelSet> {
    if ratio < 0.0 || !ratio.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "distortion ratio must be >= 0, got {ratio}"
        )));
    }
    let mut out = channels.clone();
    if ratio == 0.0 {
        return Ok(out);
    }
    let mut rng = rng::substream(seed, "csi-distortion", 0);
    for tx in 0..channels.node_count {
        for rx in 0..channels.node_count {
            for sub in 0..channels.subchannel_count {
                let h = channels.gain(tx, rx, sub);
                let entries = (h.rows() * h.cols()) as f64;
                let variance = ratio * h.frob_norm_sq() / entries;
                if variance == 0.0 {
                    continue;
                }
                let m = out.gain_mut(tx, rx, sub);
                for entry in m.data_mut() {
                    *entry += rng::complex_gaussian(&mut rng, variance);
                }
            }
        }
    }
    Ok(out)
}

/// Serialized form of a scenario: params and seed always, materialized state
/// optionally. Loading a document without materialized state regenerates it
/// from `(params, seed)`.
#[derive(Serialize, Deserialize)]
struct ScenarioDocument {
    params: ScenarioParams,
    seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    materialized: Option<MaterializedState>,
}

#[derive(Serialize, Deserialize)]
struct MaterializedState {
    distances: Vec<Vec<f64>>,
    task_sizes: Vec<f64>,
    cpus: Vec<f64>,
    betas: Vec<f64>,
    channels: ChannelSet,
}

/// Serialize a scenario to JSON, optionally embedding the materialized
/// channels and draws (lossless at 64-bit float precision).
pub fn scenario_to_json(scenario: &NetworkScenario, materialize: bool) -> Result<String> {
    let doc = ScenarioDocument {
        params: scenario.params.clone(),
        seed: scenario.seed,
        materialized: materialize.then(|| MaterializedState {
            distances: scenario.distances.clone(),
            task_sizes: scenario.task_sizes.clone(),
            cpus: scenario.cpus.clone(),
            betas: scenario.betas.clone(),
            channels: scenario.channels.clone(),
        }),
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

/// Load a scenario from its JSON document.
pub fn scenario_from_json(json: &str) -> Result<NetworkScenario> {
    let doc: ScenarioDocument = serde_json::from_str(json)?;
    match doc.materialized {
        Some(m) => {
            doc.params.validate()?;
            Ok(NetworkScenario {
                params: doc.params,
                seed: doc.seed,
                distances: m.distances,
                task_sizes: m.task_sizes,
                cpus: m.cpus,
                betas: m.betas,
                channels: m.channels,
            })
        }
        None => generate_scenario(&doc.params, doc.seed),
    }
}
