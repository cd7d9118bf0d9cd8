//! Scenario generation: demand scenarios from coefficient sweeps with
//! multiplicative noise, N-1 observation vectors built from average
//! flow-change rates on key lines, and selection of the network scenario
//! set from a cluster assignment.

use crate::cluster::{kmeans, ClusterError};
use crate::dispatch::{demand_flow_offsets, unit_ptdf_columns, DispatchTrajectory};
use crate::grid::{GridModel, LineId};
use crate::ptdf::{compute_ptdf, PowerFlowError, PtdfMatrix};
use crate::rng::{derive_seed, rng_for};
use rand_distr::{Distribution, Normal};
use std::path::Path;
use thiserror::Error;

/// Flow magnitudes below this are treated as zero when forming change-rate
/// ratios, and the ratio cap applied in that case.
pub const FLOW_EPSILON_MW: f64 = 1e-6;
pub const RATIO_CAP: f64 = 1e6;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read demand file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("demand file {path}: {message}")]
    Csv { path: String, message: String },
    #[error("invalid demand series: {0}")]
    InvalidDemand(String),
    #[error("invalid scenario parameters: {0}")]
    InvalidRange(String),
    #[error("{0}")]
    ShapeMismatch(String),
    #[error("line {0} is not part of the clustered outage set")]
    UnknownLine(LineId),
    #[error(transparent)]
    PowerFlow(#[from] PowerFlowError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
}

/// Per-bus MW demand over consecutive slots.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandSeries {
    n_buses: usize,
    n_slots: usize,
    /// Layout: values[slot * n_buses + bus].
    values: Vec<f64>,
}

impl DemandSeries {
    pub fn new(n_buses: usize, values: Vec<f64>) -> Result<Self, ScenarioError> {
        if n_buses == 0 {
            return Err(ScenarioError::InvalidDemand("series has no buses".into()));
        }
        if values.is_empty() || values.len() % n_buses != 0 {
            return Err(ScenarioError::InvalidDemand(format!(
                "{} values do not fill whole {}-bus slots",
                values.len(),
                n_buses
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(ScenarioError::InvalidDemand(format!(
                "demand values must be finite and >= 0, found {bad}"
            )));
        }
        Ok(DemandSeries {
            n_buses,
            n_slots: values.len() / n_buses,
            values,
        })
    }

    pub fn n_buses(&self) -> usize {
        self.n_buses
    }

    pub fn n_slots(&self) -> usize {
        self.n_slots
    }

    /// Demand of bus index `j` (0-based) at `slot`.
    pub fn get(&self, j: usize, slot: usize) -> f64 {
        self.values[slot * self.n_buses + j]
    }

    /// Per-bus demand row of one slot.
    pub fn row(&self, slot: usize) -> &[f64] {
        &self.values[slot * self.n_buses..(slot + 1) * self.n_buses]
    }

    /// Total system demand per slot.
    pub fn slot_totals(&self) -> Vec<f64> {
        (0..self.n_slots)
            .map(|s| self.row(s).iter().sum())
            .collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Loads a demand CSV with header `bus_1..bus_N`, one row per slot, MW.
pub fn load_demand_csv(path: impl AsRef<Path>) -> Result<DemandSeries, ScenarioError> {
    let path = path.as_ref();
    let fail = |message: String| ScenarioError::Csv {
        path: path.display().to_string(),
        message,
    };
    let file = std::fs::File::open(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);

    let headers = reader.headers().map_err(|e| fail(e.to_string()))?.clone();
    let n_buses = headers.len();
    for (i, h) in headers.iter().enumerate() {
        let expected = format!("bus_{}", i + 1);
        if h != expected {
            return Err(fail(format!(
                "column {} is named '{h}', expected '{expected}'",
                i + 1
            )));
        }
    }

    let mut values = Vec::new();
    for (row_ix, record) in reader.records().enumerate() {
        let record = record.map_err(|e| fail(e.to_string()))?;
        if record.len() != n_buses {
            return Err(fail(format!(
                "row {} has {} fields, expected {}",
                row_ix + 2,
                record.len(),
                n_buses
            )));
        }
        for field in record.iter() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| fail(format!("row {}: '{field}' is not a number", row_ix + 2)))?;
            values.push(v);
        }
    }
    DemandSeries::new(n_buses, values)
}

/// One demand scenario: the base series scaled by a coefficient with
/// multiplicative Gaussian noise.
#[derive(Debug, Clone)]
pub struct DemandScenario {
    /// 1-based scenario id s_D.
    pub id: u32,
    pub coefficient: f64,
    pub noise_seed: u64,
    pub values: DemandSeries,
}

/// Builds `count` demand scenarios with coefficients evenly spaced over
/// [low, high] and per-entry noise of relative standard deviation
/// `noise_sigma`, all derived from `seed`.
pub fn generate_demand_scenarios(
    base: &DemandSeries,
    count: usize,
    low: f64,
    high: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<Vec<DemandScenario>, ScenarioError> {
    if count < 1 {
        return Err(ScenarioError::InvalidRange("count must be >= 1".into()));
    }
    if !(low > 0.0) || !(low <= high) || !low.is_finite() || !high.is_finite() {
        return Err(ScenarioError::InvalidRange(format!(
            "coefficient range must satisfy 0 < low <= high, got [{low}, {high}]"
        )));
    }
    if !(noise_sigma >= 0.0) || !noise_sigma.is_finite() {
        return Err(ScenarioError::InvalidRange(format!(
            "noise_sigma must be >= 0, got {noise_sigma}"
        )));
    }

    let mut scenarios = Vec::with_capacity(count);
    for k in 1..=count {
        let coefficient = if count == 1 {
            (low + high) / 2.0
        } else {
            low + (k - 1) as f64 * (high - low) / (count - 1) as f64
        };
        let noise_seed = derive_seed(seed, k as u64);
        let mut values = Vec::with_capacity(base.values().len());
        if noise_sigma == 0.0 {
            values.extend(base.values().iter().map(|v| v * coefficient));
        } else {
            let mut rng = rng_for(noise_seed);
            let normal = Normal::new(0.0, noise_sigma).expect("sigma checked above");
            for v in base.values() {
                let eps: f64 = normal.sample(&mut rng);
                values.push((v * coefficient * (1.0 + eps)).max(0.0));
            }
        }
        scenarios.push(DemandScenario {
            id: k as u32,
            coefficient,
            noise_seed,
            values: DemandSeries::new(base.n_buses(), values)?,
        });
    }
    Ok(scenarios)
}

/// One network condition of the evaluation set.
#[derive(Debug, Clone)]
pub struct NetworkScenario {
    /// 1-based scenario id s_T.
    pub id: u32,
    /// `None` for the intact network.
    pub outage_line: Option<LineId>,
    pub ptdf: PtdfMatrix,
}

/// Clamped average flow-change rates of one outage on the key lines.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationVector {
    pub outage_line: LineId,
    pub features: Vec<f64>,
}

/// Average |F_outage / F_intact| per key line over every (window, slot),
/// clamped below at 1.
///
/// Near-zero intact flows would make the ratio blow up; such slots
/// contribute 1 when the outage flow is also near zero and the capped
/// ratio otherwise.
pub fn compute_observation_vector(
    grid: &GridModel,
    outage: LineId,
    key_lines: &[LineId],
    base_dispatch: &DispatchTrajectory,
    outage_dispatch: &DispatchTrajectory,
    demand: &DemandSeries,
) -> Result<ObservationVector, ScenarioError> {
    if key_lines.is_empty() {
        return Err(ScenarioError::InvalidRange("key line list is empty".into()));
    }
    let (n_t, n_tau) = (base_dispatch.n_t(), base_dispatch.n_tau());
    if outage_dispatch.n_t() != n_t
        || outage_dispatch.n_tau() != n_tau
        || base_dispatch.n_units() != grid.n_units()
        || outage_dispatch.n_units() != grid.n_units()
    {
        return Err(ScenarioError::ShapeMismatch(
            "base and outage dispatch dimensions must match the grid and each other".into(),
        ));
    }
    if demand.n_slots() < n_t + n_tau - 1 {
        return Err(ScenarioError::ShapeMismatch(format!(
            "demand covers {} slots, dispatch needs {}",
            demand.n_slots(),
            n_t + n_tau - 1
        )));
    }

    let intact = compute_ptdf(grid, None)?;
    let outaged = compute_ptdf(grid, Some(outage))?;
    let tu_base = unit_ptdf_columns(grid, &intact);
    let tu_out = unit_ptdf_columns(grid, &outaged);
    let td_base = demand_flow_offsets(&intact, demand);
    let td_out = demand_flow_offsets(&outaged, demand);

    let n_g = grid.n_units();
    let mut sums = vec![0.0f64; key_lines.len()];
    for t in 0..n_t {
        for tau in 0..n_tau {
            let slot = t + tau;
            for (kx, &key) in key_lines.iter().enumerate() {
                let l = key.index();
                let mut f_base = -td_base[(l, slot)];
                let mut f_out = -td_out[(l, slot)];
                for i in 0..n_g {
                    f_base += tu_base[(l, i)] * base_dispatch.get(i, t, tau);
                    f_out += tu_out[(l, i)] * outage_dispatch.get(i, t, tau);
                }
                let term = if f_base.abs() < FLOW_EPSILON_MW {
                    if f_out.abs() < FLOW_EPSILON_MW {
                        1.0
                    } else {
                        RATIO_CAP
                    }
                } else {
                    (f_out / f_base).abs()
                };
                sums[kx] += term;
            }
        }
    }

    let denom = (n_t * n_tau) as f64;
    let features = sums.into_iter().map(|s| (s / denom).max(1.0)).collect();
    Ok(ObservationVector {
        outage_line: outage,
        features,
    })
}

/// Result of clustering the observation vectors of candidate outages.
#[derive(Debug, Clone)]
pub struct ClusterAssignment {
    pub lines: Vec<LineId>,
    pub cluster: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
}

impl ClusterAssignment {
    pub fn cluster_of(&self, line: LineId) -> Option<usize> {
        self.lines
            .iter()
            .position(|&l| l == line)
            .map(|ix| self.cluster[ix])
    }

    pub fn members_of(&self, cluster: usize) -> Vec<LineId> {
        self.lines
            .iter()
            .zip(&self.cluster)
            .filter(|(_, &c)| c == cluster)
            .map(|(&l, _)| l)
            .collect()
    }
}

/// K-means over observation vectors; deterministic in `seed`.
pub fn cluster_observations(
    vectors: &[ObservationVector],
    k: usize,
    seed: u64,
) -> Result<ClusterAssignment, ScenarioError> {
    let points: Vec<Vec<f64>> = vectors.iter().map(|v| v.features.clone()).collect();
    let result = kmeans(&points, k, seed)?;
    Ok(ClusterAssignment {
        lines: vectors.iter().map(|v| v.outage_line).collect(),
        cluster: result.assignment,
        centroids: result.centroids,
        inertia: result.inertia,
    })
}

/// Builds the network scenario set: every outage sharing the trained
/// outage's cluster, with its N-1 PTDF computed.
pub fn select_network_scenarios(
    assignment: &ClusterAssignment,
    trained_outage: LineId,
    grid: &GridModel,
) -> Result<Vec<NetworkScenario>, ScenarioError> {
    let cluster = assignment
        .cluster_of(trained_outage)
        .ok_or(ScenarioError::UnknownLine(trained_outage))?;
    let members = assignment.members_of(cluster);
    let mut scenarios = Vec::with_capacity(members.len());
    for (ix, line) in members.iter().enumerate() {
        scenarios.push(NetworkScenario {
            id: ix as u32 + 1,
            outage_line: Some(*line),
            ptdf: compute_ptdf(grid, Some(*line))?,
        });
    }
    Ok(scenarios)
}
