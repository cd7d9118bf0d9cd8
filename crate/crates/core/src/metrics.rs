//! Violation tensors and scenario scoring.
//!
//! Violations are measured on the raw trajectory against the grid's
//! physical limits; flows come straight from the PTDF product, so an
//! imbalanced policy simply shows up as flow on the slack-connected
//! corridors rather than as an error.

use crate::dispatch::{demand_flow_offsets, unit_ptdf_columns, DispatchTrajectory};
use crate::grid::GridModel;
use crate::ptdf::PtdfMatrix;
use crate::scenario::DemandSeries;
use serde::Serialize;
use thiserror::Error;

/// Relative violations below this are recorded as zero. The dispatch
/// solver terminates at a 1e-6 MW absolute residual, so replaying its own
/// trajectory can leave violations up to roughly 3e-7 relative on the
/// smallest limits; anything under the floor is below measurement
/// resolution, not a policy defect.
pub const VIOLATION_FLOOR: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("{0}")]
    ShapeMismatch(String),
    #[error("baseline trajectory has non-positive total cost {0}")]
    ZeroBaselineCost(f64),
    #[error("no scenario with a feasible baseline to aggregate")]
    NoScoredScenarios,
}

/// Relative violation magnitudes per window slot: one output and one ramp
/// entry per unit, one flow entry per line.
#[derive(Debug, Clone)]
pub struct ViolationTensor {
    n_g: usize,
    n_l: usize,
    n_t: usize,
    n_tau: usize,
    vo: Vec<f64>,
    vr: Vec<f64>,
    vl: Vec<f64>,
}

impl ViolationTensor {
    fn ix_unit(&self, i: usize, t: usize, tau: usize) -> usize {
        (t * self.n_tau + tau) * self.n_g + i
    }

    fn ix_line(&self, l: usize, t: usize, tau: usize) -> usize {
        (t * self.n_tau + tau) * self.n_l + l
    }

    pub fn output(&self, i: usize, t: usize, tau: usize) -> f64 {
        self.vo[self.ix_unit(i, t, tau)]
    }

    pub fn ramp(&self, i: usize, t: usize, tau: usize) -> f64 {
        self.vr[self.ix_unit(i, t, tau)]
    }

    pub fn flow(&self, l: usize, t: usize, tau: usize) -> f64 {
        self.vl[self.ix_line(l, t, tau)]
    }

    /// Sum of every violation entry.
    pub fn total(&self) -> f64 {
        self.vo.iter().chain(&self.vr).chain(&self.vl).sum()
    }

    /// Largest single violation entry, 0 when clean.
    pub fn max(&self) -> f64 {
        self.vo
            .iter()
            .chain(&self.vr)
            .chain(&self.vl)
            .fold(0.0, |m, &v| m.max(v))
    }

    /// Number of violated constraints (entries strictly above zero).
    pub fn count_positive(&self) -> usize {
        self.vo
            .iter()
            .chain(&self.vr)
            .chain(&self.vl)
            .filter(|&&v| v > 0.0)
            .count()
    }

    /// Whether any constraint is violated at window `t`, slot `tau`.
    pub fn slot_violated(&self, t: usize, tau: usize) -> bool {
        (0..self.n_g).any(|i| self.output(i, t, tau) > 0.0 || self.ramp(i, t, tau) > 0.0)
            || (0..self.n_l).any(|l| self.flow(l, t, tau) > 0.0)
    }

    /// Constraints tracked per (window, slot) pair.
    pub fn constraints_per_slot(&self) -> usize {
        2 * self.n_g + self.n_l
    }

    pub fn n_slots(&self) -> usize {
        self.n_t * self.n_tau
    }
}

fn check_shapes(
    grid: &GridModel,
    ptdf: &PtdfMatrix,
    demand: &DemandSeries,
    trajectory: &DispatchTrajectory,
) -> Result<(), MetricsError> {
    if trajectory.n_units() != grid.n_units() {
        return Err(MetricsError::ShapeMismatch(format!(
            "trajectory covers {} units, grid has {}",
            trajectory.n_units(),
            grid.n_units()
        )));
    }
    if ptdf.n_buses() != grid.n_buses() || ptdf.n_lines() != grid.n_lines() {
        return Err(MetricsError::ShapeMismatch(
            "PTDF dimensions do not match the grid".into(),
        ));
    }
    if demand.n_buses() != grid.n_buses() {
        return Err(MetricsError::ShapeMismatch(format!(
            "demand covers {} buses, grid has {}",
            demand.n_buses(),
            grid.n_buses()
        )));
    }
    let needed = trajectory.n_t() + trajectory.n_tau() - 1;
    if demand.n_slots() < needed {
        return Err(MetricsError::ShapeMismatch(format!(
            "demand covers {} slots, trajectory needs {}",
            demand.n_slots(),
            needed
        )));
    }
    Ok(())
}

/// Measures output, ramp, and flow violations of a trajectory.
///
/// Output: `max((P - p_max)/p_max, (p_min - P)/max(p_min, 0.01 p_max), 0)`.
/// Ramp: overshoot of the per-slot step relative to the ramp limit, with
/// slot 0 of each window anchored exactly like the dispatch problem.
/// Flow: `max(|F|/limit - 1, 0)` per line. A value of exactly the limit is
/// not a violation, and entries below [`VIOLATION_FLOOR`] are recorded as
/// zero.
pub fn compute_violations(
    grid: &GridModel,
    ptdf: &PtdfMatrix,
    demand: &DemandSeries,
    trajectory: &DispatchTrajectory,
) -> Result<ViolationTensor, MetricsError> {
    check_shapes(grid, ptdf, demand, trajectory)?;
    let (n_g, n_l) = (grid.n_units(), grid.n_lines());
    let (n_t, n_tau) = (trajectory.n_t(), trajectory.n_tau());
    let tu = unit_ptdf_columns(grid, ptdf);
    let td = demand_flow_offsets(ptdf, demand);

    let mut tensor = ViolationTensor {
        n_g,
        n_l,
        n_t,
        n_tau,
        vo: vec![0.0; n_g * n_t * n_tau],
        vr: vec![0.0; n_g * n_t * n_tau],
        vl: vec![0.0; n_l * n_t * n_tau],
    };

    let floored = |v: f64| if v < VIOLATION_FLOOR { 0.0 } else { v };
    for t in 0..n_t {
        for tau in 0..n_tau {
            for (i, unit) in grid.units.iter().enumerate() {
                let p = trajectory.get(i, t, tau);
                let over = (p - unit.p_max) / unit.p_max;
                let under_den = unit.p_min.max(0.01 * unit.p_max);
                let under = (unit.p_min - p) / under_den;
                let ix = tensor.ix_unit(i, t, tau);
                tensor.vo[ix] = floored(over.max(under).max(0.0));

                let prev = if tau == 0 {
                    trajectory.anchor(i, t)
                } else {
                    trajectory.get(i, t, tau - 1)
                };
                let up = (p - prev - unit.ramp_up) / unit.ramp_up;
                let down = (prev - p - unit.ramp_down) / unit.ramp_down;
                tensor.vr[ix] = floored(up.max(down).max(0.0));
            }
            let slot = t + tau;
            for (l, link) in grid.lines.iter().enumerate() {
                let mut flow = -td[(l, slot)];
                for i in 0..n_g {
                    flow += tu[(l, i)] * trajectory.get(i, t, tau);
                }
                let ix = tensor.ix_line(l, t, tau);
                tensor.vl[ix] = floored((flow.abs() / link.flow_limit - 1.0).max(0.0));
            }
        }
    }
    Ok(tensor)
}

/// Total production cost over every (window, slot) pair of a trajectory.
pub fn trajectory_cost(grid: &GridModel, trajectory: &DispatchTrajectory) -> f64 {
    let mut total = 0.0;
    for t in 0..trajectory.n_t() {
        for tau in 0..trajectory.n_tau() {
            for (i, unit) in grid.units.iter().enumerate() {
                total += unit.cost(trajectory.get(i, t, tau));
            }
        }
    }
    total
}

/// Scores of one (network, demand) scenario for one policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScenarioMetrics {
    /// Relative cost error against the baseline, 0 when costs match.
    pub rce: f64,
    /// Sum of all violation magnitudes.
    pub rvs: f64,
    /// Largest single violation magnitude.
    pub rvm: f64,
    /// Violated constraints as a fraction of all tracked constraints.
    pub nvc: f64,
    /// (window, slot) pairs with any violation, as a fraction of all pairs.
    pub nvt: f64,
    /// False when the baseline was infeasible and the scenario is skipped.
    pub feasible_baseline: bool,
}

impl ScenarioMetrics {
    /// Placeholder row for a scenario whose baseline never solved.
    pub fn skipped() -> Self {
        ScenarioMetrics {
            rce: 0.0,
            rvs: 0.0,
            rvm: 0.0,
            nvc: 0.0,
            nvt: 0.0,
            feasible_baseline: false,
        }
    }
}

/// Scores `trajectory` against the scenario's feasible `baseline`.
pub fn scenario_metrics(
    grid: &GridModel,
    ptdf: &PtdfMatrix,
    demand: &DemandSeries,
    trajectory: &DispatchTrajectory,
    baseline: &DispatchTrajectory,
) -> Result<ScenarioMetrics, MetricsError> {
    check_shapes(grid, ptdf, demand, baseline)?;
    if trajectory.n_units() != baseline.n_units()
        || trajectory.n_t() != baseline.n_t()
        || trajectory.n_tau() != baseline.n_tau()
    {
        return Err(MetricsError::ShapeMismatch(
            "trajectory and baseline dimensions differ".into(),
        ));
    }
    let base_cost = trajectory_cost(grid, baseline);
    if !(base_cost > 0.0) {
        return Err(MetricsError::ZeroBaselineCost(base_cost));
    }

    let tensor = compute_violations(grid, ptdf, demand, trajectory)?;
    let slots = tensor.n_slots() as f64;
    let violated_slots = (0..trajectory.n_t())
        .flat_map(|t| (0..trajectory.n_tau()).map(move |tau| (t, tau)))
        .filter(|&(t, tau)| tensor.slot_violated(t, tau))
        .count();

    Ok(ScenarioMetrics {
        rce: trajectory_cost(grid, trajectory) / base_cost - 1.0,
        rvs: tensor.total(),
        rvm: tensor.max(),
        nvc: tensor.count_positive() as f64 / (slots * tensor.constraints_per_slot() as f64),
        nvt: violated_slots as f64 / slots,
        feasible_baseline: true,
    })
}

/// Aggregates over all scenarios of one policy run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AggregateMetrics {
    pub rce_mean: f64,
    pub rvs_sum: f64,
    pub rvm_max: f64,
    pub nvc_mean: f64,
    pub nvt_mean: f64,
    /// Percentage of scored scenarios with no violation at all.
    pub eta_percent: f64,
    pub scored: usize,
    pub skipped: usize,
}

/// Combines per-scenario metrics; skipped scenarios are excluded from every
/// average and from the feasibility rate's denominator.
pub fn aggregate(metrics: &[ScenarioMetrics]) -> Result<AggregateMetrics, MetricsError> {
    let scored: Vec<&ScenarioMetrics> =
        metrics.iter().filter(|m| m.feasible_baseline).collect();
    if scored.is_empty() {
        return Err(MetricsError::NoScoredScenarios);
    }
    let n = scored.len() as f64;
    let violated = scored.iter().filter(|m| m.nvt > 0.0).count();
    Ok(AggregateMetrics {
        rce_mean: scored.iter().map(|m| m.rce).sum::<f64>() / n,
        rvs_sum: scored.iter().map(|m| m.rvs).sum(),
        rvm_max: scored.iter().fold(0.0, |acc, m| acc.max(m.rvm)),
        nvc_mean: scored.iter().map(|m| m.nvc).sum::<f64>() / n,
        nvt_mean: scored.iter().map(|m| m.nvt).sum::<f64>() / n,
        eta_percent: 100.0 * (1.0 - violated as f64 / n),
        scored: scored.len(),
        skipped: metrics.len() - scored.len(),
    })
}
