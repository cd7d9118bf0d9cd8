//! Rolling-horizon look-ahead dispatch: window program construction, the
//! DCOPF baseline chain, and the policy interface that adapts built-in
//! reference policies and external trajectory files to one shape.
//!
//! Each window t covers slots t..t+N_tau-1. Window variables are ordered
//! slot-major: variable tau * N_G + i is unit i's output at offset tau. The
//! ramp rows of offset 0 anchor to the committed output of the previous
//! window, so consecutive windows form a chain; the chain's first anchor is
//! the configured initial output.

use crate::grid::GridModel;
use crate::ptdf::PtdfMatrix;
use crate::qp::{ConvexProgram, QpSession, SolveStatus, SolverError, SolverOptions};
use crate::rng::{derive_seed, rng_for, scenario_stream};
use crate::scenario::{DemandScenario, DemandSeries, NetworkScenario};
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LookAheadConfig {
    /// Number of dispatch windows N_T.
    pub n_t: usize,
    /// Slots per window N_tau.
    pub n_tau: usize,
    pub slot_minutes: u32,
}

impl LookAheadConfig {
    pub fn new(n_t: usize, n_tau: usize, slot_minutes: u32) -> Result<Self, DispatchError> {
        let config = LookAheadConfig {
            n_t,
            n_tau,
            slot_minutes,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), DispatchError> {
        if self.n_t < 1 {
            return Err(DispatchError::InvalidConfig("n_t must be >= 1".into()));
        }
        if self.n_tau < 1 {
            return Err(DispatchError::InvalidConfig("n_tau must be >= 1".into()));
        }
        if self.slot_minutes == 0 {
            return Err(DispatchError::InvalidConfig(
                "slot_minutes must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Slots a demand series must cover so every window is fully defined.
    pub fn padded_slots(&self) -> usize {
        self.n_t + self.n_tau - 1
    }
}

#[derive(Debug, Error)]
pub enum DispatchError {
    #[error("invalid dispatch configuration: {0}")]
    InvalidConfig(String),
    #[error("window {window} infeasible: {constraint} violated by {violation:.3} MW")]
    WindowInfeasible {
        window: usize,
        constraint: String,
        violation: f64,
    },
    #[error("solver failed to converge in window {window}")]
    SolverStalled { window: usize },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("trajectory file {path}: {message}")]
    TrajectoryFile { path: String, message: String },
    #[error("trajectory shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("no stored trajectory for scenario ({s_t}, {s_d})")]
    MissingScenario { s_t: u32, s_d: u32 },
}

/// Dense N_G x N_T x N_tau output tensor plus the t=1 ramp anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct DispatchTrajectory {
    n_units: usize,
    n_t: usize,
    n_tau: usize,
    /// Layout: values[(t * n_tau + tau) * n_units + i].
    values: Vec<f64>,
    initial_output: Vec<f64>,
}

impl DispatchTrajectory {
    pub fn zeros(n_units: usize, config: &LookAheadConfig, initial_output: Vec<f64>) -> Self {
        assert_eq!(initial_output.len(), n_units);
        DispatchTrajectory {
            n_units,
            n_t: config.n_t,
            n_tau: config.n_tau,
            values: vec![0.0; n_units * config.n_t * config.n_tau],
            initial_output,
        }
    }

    pub fn from_values(
        n_units: usize,
        n_t: usize,
        n_tau: usize,
        initial_output: Vec<f64>,
        values: Vec<f64>,
    ) -> Result<Self, DispatchError> {
        if initial_output.len() != n_units {
            return Err(DispatchError::ShapeMismatch(format!(
                "anchor has {} entries, expected {}",
                initial_output.len(),
                n_units
            )));
        }
        let expected = n_units * n_t * n_tau;
        if values.len() != expected {
            return Err(DispatchError::ShapeMismatch(format!(
                "tensor has {} values, expected {} ({} units x {} windows x {} slots)",
                values.len(),
                expected,
                n_units,
                n_t,
                n_tau
            )));
        }
        if values.iter().chain(&initial_output).any(|v| !v.is_finite()) {
            return Err(DispatchError::ShapeMismatch(
                "trajectory contains non-finite values".into(),
            ));
        }
        Ok(DispatchTrajectory {
            n_units,
            n_t,
            n_tau,
            values,
            initial_output,
        })
    }

    pub fn n_units(&self) -> usize {
        self.n_units
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn n_tau(&self) -> usize {
        self.n_tau
    }

    /// Output of unit `i` in window `t` at offset `tau` (all 0-based).
    pub fn get(&self, i: usize, t: usize, tau: usize) -> f64 {
        self.values[(t * self.n_tau + tau) * self.n_units + i]
    }

    pub fn set(&mut self, i: usize, t: usize, tau: usize, value: f64) {
        self.values[(t * self.n_tau + tau) * self.n_units + i] = value;
    }

    /// Ramp anchor of window `t`: the committed (tau=0) output of the
    /// previous window, or the initial output for the first window.
    pub fn anchor(&self, i: usize, t: usize) -> f64 {
        if t == 0 {
            self.initial_output[i]
        } else {
            self.get(i, t - 1, 0)
        }
    }

    pub fn initial_output(&self) -> &[f64] {
        &self.initial_output
    }

    /// Contiguous window block, slot-major (tau * n_units + i).
    pub fn window(&self, t: usize) -> &[f64] {
        let stride = self.n_tau * self.n_units;
        &self.values[t * stride..(t + 1) * stride]
    }

    pub fn window_mut(&mut self, t: usize) -> &mut [f64] {
        let stride = self.n_tau * self.n_units;
        &mut self.values[t * stride..(t + 1) * stride]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// PTDF columns of the buses hosting each unit, as an N_L x N_G matrix.
pub fn unit_ptdf_columns(grid: &GridModel, ptdf: &PtdfMatrix) -> DMatrix<f64> {
    let m = ptdf.matrix();
    DMatrix::from_fn(grid.n_lines(), grid.n_units(), |l, i| {
        m[(l, grid.units[i].bus.index())]
    })
}

/// Flow contribution of demand per line and slot: entry (l, s) equals
/// sum_j T[l, j] * D[j, s].
pub fn demand_flow_offsets(ptdf: &PtdfMatrix, demand: &DemandSeries) -> DMatrix<f64> {
    let n_slots = demand.n_slots();
    let n_buses = demand.n_buses();
    let d = DMatrix::from_fn(n_buses, n_slots, |j, s| demand.get(j, s));
    ptdf.matrix() * d
}

/// Per-bus net MW injections for one slot of outputs and demand.
pub fn net_injections(grid: &GridModel, outputs: &[f64], demand_row: &[f64]) -> DVector<f64> {
    let mut inj = DVector::from_iterator(grid.n_buses(), demand_row.iter().map(|d| -d));
    for (i, unit) in grid.units.iter().enumerate() {
        inj[unit.bus.index()] += outputs[i];
    }
    inj
}

#[derive(Debug, Clone, Copy)]
enum RowKind {
    RampUp { tau: usize, unit: usize },
    RampDown { tau: usize, unit: usize },
    FlowPos { tau: usize, line: usize },
    FlowNeg { tau: usize, line: usize },
}

/// Matrices shared by every window of one (grid, topology) pair.
struct WindowAssembly {
    n_tau: usize,
    quadratic: DVector<f64>,
    linear: DVector<f64>,
    constant: f64,
    eq_matrix: DMatrix<f64>,
    ineq_matrix: DMatrix<f64>,
    rows: Vec<RowKind>,
    lower: DVector<f64>,
    upper: DVector<f64>,
}

fn assemble(grid: &GridModel, ptdf: &PtdfMatrix, config: &LookAheadConfig) -> WindowAssembly {
    let n_g = grid.n_units();
    let n_l = grid.n_lines();
    let n_tau = config.n_tau;
    let n = n_g * n_tau;
    let var = |tau: usize, i: usize| tau * n_g + i;

    let mut quadratic = DVector::zeros(n);
    let mut linear = DVector::zeros(n);
    let mut lower = DVector::zeros(n);
    let mut upper = DVector::zeros(n);
    let mut constant = 0.0;
    for tau in 0..n_tau {
        for (i, unit) in grid.units.iter().enumerate() {
            let v = var(tau, i);
            quadratic[v] = unit.cost_quadratic;
            linear[v] = unit.cost_linear;
            lower[v] = unit.p_min;
            upper[v] = unit.p_max;
        }
        constant += grid.units.iter().map(|u| u.cost_constant).sum::<f64>();
    }

    let mut eq_matrix = DMatrix::zeros(n_tau, n);
    for tau in 0..n_tau {
        for i in 0..n_g {
            eq_matrix[(tau, var(tau, i))] = 1.0;
        }
    }

    let t_units = unit_ptdf_columns(grid, ptdf);
    let m_ineq = 2 * n_g * n_tau + 2 * n_l * n_tau;
    let mut ineq_matrix = DMatrix::zeros(m_ineq, n);
    let mut rows = Vec::with_capacity(m_ineq);
    let mut r = 0;
    for tau in 0..n_tau {
        for i in 0..n_g {
            ineq_matrix[(r, var(tau, i))] = 1.0;
            if tau > 0 {
                ineq_matrix[(r, var(tau - 1, i))] = -1.0;
            }
            rows.push(RowKind::RampUp { tau, unit: i });
            r += 1;
            ineq_matrix[(r, var(tau, i))] = -1.0;
            if tau > 0 {
                ineq_matrix[(r, var(tau - 1, i))] = 1.0;
            }
            rows.push(RowKind::RampDown { tau, unit: i });
            r += 1;
        }
    }
    for tau in 0..n_tau {
        for l in 0..n_l {
            for i in 0..n_g {
                ineq_matrix[(r, var(tau, i))] = t_units[(l, i)];
                ineq_matrix[(r + 1, var(tau, i))] = -t_units[(l, i)];
            }
            rows.push(RowKind::FlowPos { tau, line: l });
            rows.push(RowKind::FlowNeg { tau, line: l });
            r += 2;
        }
    }

    WindowAssembly {
        n_tau,
        quadratic,
        linear,
        constant,
        eq_matrix,
        ineq_matrix,
        rows,
        lower,
        upper,
    }
}

impl WindowAssembly {
    /// Right-hand side of one inequality row for window start `t`.
    fn row_rhs(&self, kind: RowKind, grid: &GridModel, td: &DMatrix<f64>, t: usize, prev: &[f64]) -> f64 {
        match kind {
            RowKind::RampUp { tau, unit } => {
                let anchor = if tau == 0 { prev[unit] } else { 0.0 };
                anchor + grid.units[unit].ramp_up
            }
            RowKind::RampDown { tau, unit } => {
                let anchor = if tau == 0 { -prev[unit] } else { 0.0 };
                anchor + grid.units[unit].ramp_down
            }
            RowKind::FlowPos { tau, line } => grid.lines[line].flow_limit + td[(line, t + tau)],
            RowKind::FlowNeg { tau, line } => grid.lines[line].flow_limit - td[(line, t + tau)],
        }
    }

    fn eq_rhs(&self, totals: &[f64], t: usize) -> DVector<f64> {
        DVector::from_iterator(self.n_tau, (0..self.n_tau).map(|tau| totals[t + tau]))
    }
}

/// Builds the full look-ahead window program starting at window `t`
/// (0-based) with ramp anchor `prev_output`.
pub fn build_dcopf_window(
    grid: &GridModel,
    ptdf: &PtdfMatrix,
    demand: &DemandSeries,
    config: &LookAheadConfig,
    t: usize,
    prev_output: &[f64],
) -> ConvexProgram {
    let assembly = assemble(grid, ptdf, config);
    let td = demand_flow_offsets(ptdf, demand);
    let totals = demand.slot_totals();
    let ineq_rhs = DVector::from_iterator(
        assembly.rows.len(),
        assembly
            .rows
            .iter()
            .map(|&k| assembly.row_rhs(k, grid, &td, t, prev_output)),
    );
    ConvexProgram {
        quadratic: assembly.quadratic.clone(),
        linear: assembly.linear.clone(),
        constant: assembly.constant,
        eq_matrix: assembly.eq_matrix.clone(),
        eq_rhs: assembly.eq_rhs(&totals, t),
        ineq_matrix: assembly.ineq_matrix.clone(),
        ineq_rhs,
        lower: assembly.lower.clone(),
        upper: assembly.upper.clone(),
    }
}

/// Largest value a row can reach anywhere inside the variable box.
fn box_max(row: nalgebra::DMatrixView<'_, f64>, lower: &DVector<f64>, upper: &DVector<f64>) -> f64 {
    let mut total = 0.0;
    for j in 0..lower.len() {
        let g = row[(0, j)];
        total += if g > 0.0 { g * upper[j] } else { g * lower[j] };
    }
    total
}

/// Solves the rolling baseline chain for one (topology, demand) scenario.
///
/// Inequality rows that can never bind for any window of this scenario are
/// dropped before the solver session is built, and each window warm-starts
/// from the previous window's solution shifted by one slot.
pub fn solve_baseline(
    grid: &GridModel,
    ptdf: &PtdfMatrix,
    demand: &DemandSeries,
    config: &LookAheadConfig,
    initial_output: &[f64],
    options: &SolverOptions,
) -> Result<DispatchTrajectory, DispatchError> {
    config.validate()?;
    if demand.n_buses() != grid.n_buses() {
        return Err(DispatchError::InvalidConfig(format!(
            "demand has {} buses, grid has {}",
            demand.n_buses(),
            grid.n_buses()
        )));
    }
    if demand.n_slots() < config.padded_slots() {
        return Err(DispatchError::InvalidConfig(format!(
            "demand covers {} slots, {} windows of length {} need {}",
            demand.n_slots(),
            config.n_t,
            config.n_tau,
            config.padded_slots()
        )));
    }
    if initial_output.len() != grid.n_units() || initial_output.iter().any(|v| !v.is_finite()) {
        return Err(DispatchError::InvalidConfig(
            "initial output must list one finite MW value per unit".into(),
        ));
    }

    let n_g = grid.n_units();
    let n_tau = config.n_tau;
    let assembly = assemble(grid, ptdf, config);
    let td = demand_flow_offsets(ptdf, demand);
    let totals = demand.slot_totals();

    // Per-line demand-offset extremes over every slot this scenario uses.
    let used_slots = config.padded_slots();
    let mut td_min = vec![f64::INFINITY; grid.n_lines()];
    let mut td_max = vec![f64::NEG_INFINITY; grid.n_lines()];
    for l in 0..grid.n_lines() {
        for s in 0..used_slots {
            td_min[l] = td_min[l].min(td[(l, s)]);
            td_max[l] = td_max[l].max(td[(l, s)]);
        }
    }

    // Smallest rhs a row can take over the whole chain, assuming anchors
    // stay inside the (bounds + initial output) envelope.
    let min_rhs = |kind: RowKind| -> f64 {
        match kind {
            RowKind::RampUp { tau, unit } => {
                let u = &grid.units[unit];
                let anchor = if tau == 0 {
                    u.p_min.min(initial_output[unit])
                } else {
                    0.0
                };
                anchor + u.ramp_up
            }
            RowKind::RampDown { tau, unit } => {
                let u = &grid.units[unit];
                let anchor = if tau == 0 {
                    -u.p_max.max(initial_output[unit])
                } else {
                    0.0
                };
                anchor + u.ramp_down
            }
            RowKind::FlowPos { line, .. } => grid.lines[line].flow_limit + td_min[line],
            RowKind::FlowNeg { line, .. } => grid.lines[line].flow_limit - td_max[line],
        }
    };

    let keep: Vec<usize> = (0..assembly.rows.len())
        .filter(|&r| {
            let reach = box_max(
                assembly.ineq_matrix.rows(r, 1),
                &assembly.lower,
                &assembly.upper,
            );
            reach > min_rhs(assembly.rows[r])
        })
        .collect();

    let mut pruned_matrix = DMatrix::zeros(keep.len(), n_g * n_tau);
    for (out, &r) in keep.iter().enumerate() {
        pruned_matrix.row_mut(out).copy_from(&assembly.ineq_matrix.row(r));
    }

    let mut prev: Vec<f64> = initial_output.to_vec();
    let pruned_rhs = |t: usize, prev: &[f64]| {
        DVector::from_iterator(
            keep.len(),
            keep.iter()
                .map(|&r| assembly.row_rhs(assembly.rows[r], grid, &td, t, prev)),
        )
    };

    let template = ConvexProgram {
        quadratic: assembly.quadratic.clone(),
        linear: assembly.linear.clone(),
        constant: assembly.constant,
        eq_matrix: assembly.eq_matrix.clone(),
        eq_rhs: assembly.eq_rhs(&totals, 0),
        ineq_matrix: pruned_matrix,
        ineq_rhs: pruned_rhs(0, &prev),
        lower: assembly.lower.clone(),
        upper: assembly.upper.clone(),
    };
    let mut session = QpSession::new(template, *options)?;

    let mut trajectory = DispatchTrajectory::zeros(n_g, config, initial_output.to_vec());
    let mut guess = DVector::zeros(n_g * n_tau);
    for t in 0..config.n_t {
        if t > 0 {
            session.update_rhs(
                &assembly.eq_rhs(&totals, t),
                &pruned_rhs(t, &prev),
                &assembly.lower,
                &assembly.upper,
            )?;
            session.warm_start(&guess);
        }
        let solution = session.solve();
        match solution.status {
            SolveStatus::Optimal => {}
            SolveStatus::Infeasible {
                constraint,
                violation,
            } => {
                return Err(DispatchError::WindowInfeasible {
                    window: t + 1,
                    constraint: constraint.to_string(),
                    violation,
                });
            }
            SolveStatus::MaxIterations => {
                return Err(DispatchError::SolverStalled { window: t + 1 });
            }
        }
        trajectory
            .window_mut(t)
            .copy_from_slice(solution.x.as_slice());
        prev.copy_from_slice(&solution.x.as_slice()[..n_g]);

        // Next window's warm start: this solution shifted one slot earlier.
        for tau in 0..n_tau {
            let src = (tau + 1).min(n_tau - 1);
            for i in 0..n_g {
                guess[tau * n_g + i] = solution.x[src * n_g + i];
            }
        }
    }
    Ok(trajectory)
}

/// Everything a policy may look at when producing a trajectory.
pub struct PolicyContext<'a> {
    pub grid: &'a GridModel,
    pub config: &'a LookAheadConfig,
    pub network: &'a NetworkScenario,
    pub demand: &'a DemandScenario,
    pub baseline: &'a DispatchTrajectory,
}

/// A named decision source evaluated once per scenario.
pub trait DispatchPolicy: Send + Sync {
    fn name(&self) -> &str;
    fn trajectory(&self, ctx: &PolicyContext<'_>) -> Result<DispatchTrajectory, DispatchError>;
}

#[derive(Debug, Clone, Copy)]
pub enum ReferenceKind {
    /// Replays the DCOPF baseline itself.
    Oracle,
    /// Baseline with multiplicative Gaussian noise per entry.
    Perturbed { sigma: f64 },
    /// Splits each slot's total demand across units proportionally to p_max,
    /// ignoring every network and ramp limit.
    Proportional,
}

pub fn reference_policy(kind: ReferenceKind, seed: u64) -> Result<Box<dyn DispatchPolicy>, DispatchError> {
    match kind {
        ReferenceKind::Oracle => Ok(Box::new(OraclePolicy)),
        ReferenceKind::Perturbed { sigma } => {
            if !(sigma >= 0.0) || !sigma.is_finite() {
                return Err(DispatchError::InvalidConfig(format!(
                    "perturbed policy needs sigma >= 0, got {sigma}"
                )));
            }
            Ok(Box::new(PerturbedPolicy {
                name: format!("perturbed-{sigma}"),
                sigma,
                seed,
            }))
        }
        ReferenceKind::Proportional => Ok(Box::new(ProportionalPolicy)),
    }
}

struct OraclePolicy;

impl DispatchPolicy for OraclePolicy {
    fn name(&self) -> &str {
        "oracle"
    }

    fn trajectory(&self, ctx: &PolicyContext<'_>) -> Result<DispatchTrajectory, DispatchError> {
        Ok(ctx.baseline.clone())
    }
}

struct PerturbedPolicy {
    name: String,
    sigma: f64,
    seed: u64,
}

impl DispatchPolicy for PerturbedPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn trajectory(&self, ctx: &PolicyContext<'_>) -> Result<DispatchTrajectory, DispatchError> {
        let mut out = ctx.baseline.clone();
        if self.sigma == 0.0 {
            return Ok(out);
        }
        let stream = scenario_stream(ctx.network.id, ctx.demand.id);
        let mut rng = rng_for(derive_seed(self.seed, stream));
        let normal = Normal::new(0.0, self.sigma).expect("sigma validated at construction");
        for t in 0..out.n_t() {
            for tau in 0..out.n_tau() {
                for i in 0..out.n_units() {
                    let eps: f64 = normal.sample(&mut rng);
                    let v = out.get(i, t, tau) * (1.0 + eps);
                    out.set(i, t, tau, v);
                }
            }
        }
        Ok(out)
    }
}

struct ProportionalPolicy;

impl DispatchPolicy for ProportionalPolicy {
    fn name(&self) -> &str {
        "proportional"
    }

    fn trajectory(&self, ctx: &PolicyContext<'_>) -> Result<DispatchTrajectory, DispatchError> {
        let grid = ctx.grid;
        let total_capacity = grid.total_capacity();
        let demand = &ctx.demand.values;
        let totals = demand.slot_totals();
        let mut out = DispatchTrajectory::zeros(
            grid.n_units(),
            ctx.config,
            ctx.baseline.initial_output().to_vec(),
        );
        for t in 0..out.n_t() {
            for tau in 0..out.n_tau() {
                let slot_total = totals[t + tau];
                for (i, unit) in grid.units.iter().enumerate() {
                    out.set(i, t, tau, slot_total * unit.p_max / total_capacity);
                }
            }
        }
        Ok(out)
    }
}

// Trajectory exchange bundle. Scenario keys are "s_t:s_d" strings; a
// BTreeMap keeps serialization order stable so round-trips are bit-exact.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrajectoryFile {
    n_t: usize,
    n_tau: usize,
    unit_ids: Vec<u32>,
    scenarios: BTreeMap<String, TrajectoryEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrajectoryEntry {
    initial_output_mw: Vec<f64>,
    values_mw: Vec<f64>,
}

fn scenario_key(s_t: u32, s_d: u32) -> String {
    format!("{s_t}:{s_d}")
}

fn parse_scenario_key(key: &str) -> Option<(u32, u32)> {
    let (a, b) = key.split_once(':')?;
    Some((a.parse().ok()?, b.parse().ok()?))
}

/// Writes trajectories for a set of scenarios in the exchange format.
pub fn save_external_trajectories(
    path: impl AsRef<Path>,
    grid: &GridModel,
    config: &LookAheadConfig,
    entries: &BTreeMap<(u32, u32), DispatchTrajectory>,
) -> Result<(), DispatchError> {
    let path = path.as_ref();
    let file = TrajectoryFile {
        n_t: config.n_t,
        n_tau: config.n_tau,
        unit_ids: grid.units.iter().map(|u| u.id.0).collect(),
        scenarios: entries
            .iter()
            .map(|(&(s_t, s_d), traj)| {
                (
                    scenario_key(s_t, s_d),
                    TrajectoryEntry {
                        initial_output_mw: traj.initial_output().to_vec(),
                        values_mw: traj.values().to_vec(),
                    },
                )
            })
            .collect(),
    };
    let text = serde_json::to_string(&file).map_err(|e| DispatchError::TrajectoryFile {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    std::fs::write(path, text).map_err(|e| DispatchError::TrajectoryFile {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// A policy that replays trajectories recorded in an exchange file.
#[derive(Debug)]
pub struct ExternalPolicy {
    name: String,
    entries: HashMap<(u32, u32), DispatchTrajectory>,
}

impl ExternalPolicy {
    pub fn scenario_ids(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.entries.keys().copied()
    }
}

/// Loads and validates an exchange file against the run's grid and horizon.
pub fn load_external_trajectory(
    path: impl AsRef<Path>,
    grid: &GridModel,
    config: &LookAheadConfig,
) -> Result<ExternalPolicy, DispatchError> {
    let path = path.as_ref();
    let fail = |message: String| DispatchError::TrajectoryFile {
        path: path.display().to_string(),
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| fail(e.to_string()))?;
    let file: TrajectoryFile = serde_json::from_str(&text).map_err(|e| fail(e.to_string()))?;

    if file.n_t != config.n_t || file.n_tau != config.n_tau {
        return Err(DispatchError::ShapeMismatch(format!(
            "file has n_t={}, n_tau={}; run expects n_t={}, n_tau={}",
            file.n_t, file.n_tau, config.n_t, config.n_tau
        )));
    }
    let expected_ids: Vec<u32> = grid.units.iter().map(|u| u.id.0).collect();
    if file.unit_ids != expected_ids {
        return Err(DispatchError::ShapeMismatch(format!(
            "file unit ids {:?} do not match grid unit ids {:?}",
            file.unit_ids, expected_ids
        )));
    }

    let mut entries = HashMap::new();
    for (key, entry) in file.scenarios {
        let (s_t, s_d) = parse_scenario_key(&key)
            .ok_or_else(|| fail(format!("scenario key '{key}' is not of the form s_t:s_d")))?;
        let trajectory = DispatchTrajectory::from_values(
            grid.n_units(),
            config.n_t,
            config.n_tau,
            entry.initial_output_mw,
            entry.values_mw,
        )?;
        entries.insert((s_t, s_d), trajectory);
    }

    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "external".to_string());
    Ok(ExternalPolicy {
        name: format!("external-{name}"),
        entries,
    })
}

impl DispatchPolicy for ExternalPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn trajectory(&self, ctx: &PolicyContext<'_>) -> Result<DispatchTrajectory, DispatchError> {
        self.entries
            .get(&(ctx.network.id, ctx.demand.id))
            .cloned()
            .ok_or(DispatchError::MissingScenario {
                s_t: ctx.network.id,
                s_d: ctx.demand.id,
            })
    }
}
