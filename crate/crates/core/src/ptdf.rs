//! Power transfer distribution factors and DC line flows.
//!
//! A PTDF entry T[l, j] is the MW flow induced on line l by injecting 1 MW
//! at bus j and withdrawing it at the slack bus. Flows follow the sign
//! convention positive = from_bus toward to_bus. N-1 matrices are built by
//! re-factorizing the reduced susceptance matrix of the outaged topology.

use crate::grid::{BusId, GridModel, LineId};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Net MW injection imbalance tolerated by [`PtdfMatrix::line_flows`].
pub const BALANCE_TOL_MW: f64 = 1e-6;

/// Which network state a PTDF matrix describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    Intact,
    Outage(LineId),
}

impl Topology {
    pub fn outage(self) -> Option<LineId> {
        match self {
            Topology::Intact => None,
            Topology::Outage(id) => Some(id),
        }
    }
}

/// Dense N_L x N_D sensitivity matrix for one topology.
///
/// The slack column is identically zero; for an outage topology the outaged
/// line's row is identically zero as well.
#[derive(Debug, Clone)]
pub struct PtdfMatrix {
    pub topology: Topology,
    values: DMatrix<f64>,
}

#[derive(Debug, Error)]
pub enum PowerFlowError {
    #[error("unknown line id {0}")]
    UnknownLine(LineId),
    #[error("outage of line {0} splits the network into islands")]
    Islanding(LineId),
    #[error("reduced susceptance matrix is singular")]
    SingularNetwork,
    #[error("injections must balance to zero: net {net:.3e} MW exceeds {BALANCE_TOL_MW:.0e} MW")]
    ImbalancedInjections { net: f64 },
    #[error("injection vector has {got} entries, grid has {expected} buses")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Computes the PTDF matrix of `grid` with `outage` removed (or the intact
/// network when `outage` is `None`).
pub fn compute_ptdf(grid: &GridModel, outage: Option<LineId>) -> Result<PtdfMatrix, PowerFlowError> {
    if let Some(id) = outage {
        if id.0 == 0 || id.0 as usize > grid.n_lines() {
            return Err(PowerFlowError::UnknownLine(id));
        }
        if !grid.is_connected(Some(id)) {
            return Err(PowerFlowError::Islanding(id));
        }
    }

    let n = grid.n_buses();
    let m = grid.n_lines();
    let slack = grid.slack().index();
    // Position of a bus after the slack row/column is deleted.
    let reduced = |bus: usize| -> Option<usize> {
        match bus.cmp(&slack) {
            std::cmp::Ordering::Less => Some(bus),
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Greater => Some(bus - 1),
        }
    };

    let mut b_red = DMatrix::zeros(n - 1, n - 1);
    let mut weighted_incidence = DMatrix::zeros(m, n - 1);
    for line in &grid.lines {
        if Some(line.id) == outage {
            continue;
        }
        let b = line.susceptance;
        let i = reduced(line.from_bus.index());
        let j = reduced(line.to_bus.index());
        if let Some(i) = i {
            b_red[(i, i)] += b;
            weighted_incidence[(line.id.index(), i)] = b;
        }
        if let Some(j) = j {
            b_red[(j, j)] += b;
            weighted_incidence[(line.id.index(), j)] = -b;
        }
        if let (Some(i), Some(j)) = (i, j) {
            b_red[(i, j)] -= b;
            b_red[(j, i)] -= b;
        }
    }

    // T = diag(b) * A_red * B_red^-1. B_red is symmetric, so solve
    // B_red * X = (diag(b) * A_red)^T and transpose back.
    let lu = b_red.lu();
    let solved = lu
        .solve(&weighted_incidence.transpose())
        .ok_or(PowerFlowError::SingularNetwork)?;
    let t_red = solved.transpose();

    let mut values = DMatrix::zeros(m, n);
    for bus in 0..n {
        if let Some(col) = reduced(bus) {
            values.column_mut(bus).copy_from(&t_red.column(col));
        }
    }

    let topology = match outage {
        None => Topology::Intact,
        Some(id) => Topology::Outage(id),
    };
    Ok(PtdfMatrix { topology, values })
}

impl PtdfMatrix {
    pub fn n_lines(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_buses(&self) -> usize {
        self.values.ncols()
    }

    /// Sensitivity of line `line` to injection at bus `bus`.
    pub fn value(&self, line: LineId, bus: BusId) -> f64 {
        self.values[(line.index(), bus.index())]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Per-line MW flows for a balanced per-bus net injection vector.
    pub fn line_flows(&self, injections: &DVector<f64>) -> Result<DVector<f64>, PowerFlowError> {
        if injections.len() != self.n_buses() {
            return Err(PowerFlowError::DimensionMismatch {
                expected: self.n_buses(),
                got: injections.len(),
            });
        }
        let net: f64 = injections.sum();
        if net.abs() > BALANCE_TOL_MW {
            return Err(PowerFlowError::ImbalancedInjections { net });
        }
        Ok(&self.values * injections)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Bus, ThermalUnit, TransmissionLine, UnitId};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn bus(id: u32, slack: bool) -> Bus {
        Bus {
            id: BusId(id),
            is_slack: slack,
        }
    }

    fn line(id: u32, from: u32, to: u32, b: f64) -> TransmissionLine {
        TransmissionLine {
            id: LineId(id),
            from_bus: BusId(from),
            to_bus: BusId(to),
            susceptance: b,
            flow_limit: 100.0,
        }
    }

    fn unit(id: u32, at: u32) -> ThermalUnit {
        ThermalUnit {
            id: UnitId(id),
            bus: BusId(at),
            p_min: 0.0,
            p_max: 100.0,
            ramp_up: 50.0,
            ramp_down: 50.0,
            cost_quadratic: 0.0,
            cost_linear: 1.0,
            cost_constant: 0.0,
        }
    }

    fn two_bus() -> GridModel {
        GridModel::from_parts(
            "two".into(),
            100.0,
            vec![bus(1, true), bus(2, false)],
            vec![line(1, 1, 2, 10.0)],
            vec![unit(1, 1)],
        )
        .unwrap()
    }

    fn three_bus_ring() -> GridModel {
        GridModel::from_parts(
            "ring".into(),
            100.0,
            vec![bus(1, true), bus(2, false), bus(3, false)],
            vec![line(1, 1, 2, 5.0), line(2, 1, 3, 5.0), line(3, 2, 3, 5.0)],
            vec![unit(1, 1)],
        )
        .unwrap()
    }

    fn parallel_pair() -> GridModel {
        GridModel::from_parts(
            "pair".into(),
            100.0,
            vec![bus(1, true), bus(2, false)],
            vec![line(1, 1, 2, 4.0), line(2, 1, 2, 4.0)],
            vec![unit(1, 1)],
        )
        .unwrap()
    }

    /// Independent check: solve B_red * theta = injections directly and read
    /// flows off the line equations.
    fn dc_flow_oracle(grid: &GridModel, outage: Option<LineId>, injections: &DVector<f64>) -> DVector<f64> {
        let n = grid.n_buses();
        let slack = grid.slack().index();
        let reduced = |b: usize| if b < slack { Some(b) } else if b == slack { None } else { Some(b - 1) };
        let mut b_red = DMatrix::zeros(n - 1, n - 1);
        for l in &grid.lines {
            if Some(l.id) == outage {
                continue;
            }
            let (i, j) = (reduced(l.from_bus.index()), reduced(l.to_bus.index()));
            if let Some(i) = i {
                b_red[(i, i)] += l.susceptance;
            }
            if let Some(j) = j {
                b_red[(j, j)] += l.susceptance;
            }
            if let (Some(i), Some(j)) = (i, j) {
                b_red[(i, j)] -= l.susceptance;
                b_red[(j, i)] -= l.susceptance;
            }
        }
        let p_red = DVector::from_iterator(
            n - 1,
            (0..n).filter(|&b| b != slack).map(|b| injections[b]),
        );
        let theta_red = b_red.lu().solve(&p_red).unwrap();
        let theta = |b: usize| reduced(b).map_or(0.0, |r| theta_red[r]);
        DVector::from_iterator(
            grid.n_lines(),
            grid.lines.iter().map(|l| {
                if Some(l.id) == outage {
                    0.0
                } else {
                    l.susceptance * (theta(l.from_bus.index()) - theta(l.to_bus.index()))
                }
            }),
        )
    }

    #[test]
    fn two_bus_entries_exact() {
        let ptdf = compute_ptdf(&two_bus(), None).unwrap();
        assert_eq!(ptdf.value(LineId(1), BusId(1)), 0.0);
        assert_eq!(ptdf.value(LineId(1), BusId(2)), -1.0);
    }

    #[test]
    fn three_bus_ring_matches_hand_solution() {
        let ptdf = compute_ptdf(&three_bus_ring(), None).unwrap();
        assert_abs_diff_eq!(ptdf.value(LineId(1), BusId(2)), -2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ptdf.value(LineId(2), BusId(2)), -1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ptdf.value(LineId(3), BusId(2)), 1.0 / 3.0, epsilon = 1e-12);
        for l in 1..=3 {
            assert_eq!(ptdf.value(LineId(l), BusId(1)), 0.0);
        }
    }

    #[test]
    fn ring_flows_for_balanced_injection() {
        let ptdf = compute_ptdf(&three_bus_ring(), None).unwrap();
        let injections = DVector::from_vec(vec![-9.0, 9.0, 0.0]);
        let flows = ptdf.line_flows(&injections).unwrap();
        assert_abs_diff_eq!(flows[0], -6.0, epsilon = 1e-9);
        assert_abs_diff_eq!(flows[1], -3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(flows[2], 3.0, epsilon = 1e-9);
    }

    #[test]
    fn parallel_outage_shifts_half_to_full() {
        let grid = parallel_pair();
        let intact = compute_ptdf(&grid, None).unwrap();
        assert_abs_diff_eq!(intact.value(LineId(1), BusId(2)), -0.5, epsilon = 1e-12);
        let outage = compute_ptdf(&grid, Some(LineId(2))).unwrap();
        assert_abs_diff_eq!(outage.value(LineId(1), BusId(2)), -1.0, epsilon = 1e-12);
        assert_eq!(outage.value(LineId(2), BusId(2)), 0.0);
    }

    #[test]
    fn islanding_outage_rejected() {
        let err = compute_ptdf(&two_bus(), Some(LineId(1))).unwrap_err();
        assert!(matches!(err, PowerFlowError::Islanding(LineId(1))), "{err}");
    }

    #[test]
    fn unknown_outage_rejected() {
        let err = compute_ptdf(&two_bus(), Some(LineId(9))).unwrap_err();
        assert!(matches!(err, PowerFlowError::UnknownLine(LineId(9))), "{err}");
    }

    #[test]
    fn imbalance_rejected() {
        let ptdf = compute_ptdf(&two_bus(), None).unwrap();
        let err = ptdf
            .line_flows(&DVector::from_vec(vec![5.0, -4.0]))
            .unwrap_err();
        assert!(matches!(err, PowerFlowError::ImbalancedInjections { .. }), "{err}");
    }

    #[test]
    fn zero_injections_zero_flows() {
        let ptdf = compute_ptdf(&three_bus_ring(), None).unwrap();
        let flows = ptdf.line_flows(&DVector::zeros(3)).unwrap();
        assert_eq!(flows, DVector::zeros(3));
    }

    /// Meshed 4-bus test system with distinct susceptances: a square plus
    /// one diagonal, 2-edge-connected.
    fn four_bus() -> GridModel {
        GridModel::from_parts(
            "four".into(),
            100.0,
            vec![bus(1, true), bus(2, false), bus(3, false), bus(4, false)],
            vec![
                line(1, 1, 2, 3.0),
                line(2, 2, 3, 7.0),
                line(3, 3, 4, 2.0),
                line(4, 4, 1, 5.0),
                line(5, 1, 3, 4.0),
            ],
            vec![unit(1, 1)],
        )
        .unwrap()
    }

    fn four_bus_slack(slack_at: u32) -> GridModel {
        let mut grid = four_bus();
        GridModel::from_parts(
            grid.name.clone(),
            grid.base_mva,
            (1..=4)
                .map(|id| bus(id, id == slack_at))
                .collect(),
            std::mem::take(&mut grid.lines),
            std::mem::take(&mut grid.units),
        )
        .unwrap()
    }

    fn balanced_injections() -> impl Strategy<Value = DVector<f64>> {
        proptest::collection::vec(-100.0f64..100.0, 4).prop_map(|mut v| {
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            for x in &mut v {
                *x -= mean;
            }
            DVector::from_vec(v)
        })
    }

    proptest! {
        #[test]
        fn superposition(a in balanced_injections(), b in balanced_injections()) {
            let ptdf = compute_ptdf(&four_bus(), None).unwrap();
            let sum = ptdf.line_flows(&(&a + &b)).unwrap();
            let parts = ptdf.line_flows(&a).unwrap() + ptdf.line_flows(&b).unwrap();
            for l in 0..sum.len() {
                let scale = sum[l].abs().max(1.0);
                prop_assert!((sum[l] - parts[l]).abs() <= 1e-9 * scale);
            }
        }

        #[test]
        fn slack_choice_does_not_change_flows(inj in balanced_injections(), slack_at in 1u32..=4) {
            let reference = compute_ptdf(&four_bus_slack(1), None).unwrap();
            let alternate = compute_ptdf(&four_bus_slack(slack_at), None).unwrap();
            let f_ref = reference.line_flows(&inj).unwrap();
            let f_alt = alternate.line_flows(&inj).unwrap();
            for l in 0..f_ref.len() {
                prop_assert!((f_ref[l] - f_alt[l]).abs() <= 1e-8);
            }
        }

        #[test]
        fn outage_flows_match_direct_solve(inj in balanced_injections(), outage_id in 1u32..=5) {
            let grid = four_bus();
            let outage = LineId(outage_id);
            if !grid.is_connected(Some(outage)) {
                return Ok(());
            }
            let ptdf = compute_ptdf(&grid, Some(outage)).unwrap();
            for b in 0..grid.n_buses() {
                prop_assert_eq!(ptdf.value(outage, BusId(b as u32 + 1)), 0.0);
            }
            let flows = ptdf.line_flows(&inj).unwrap();
            let oracle = dc_flow_oracle(&grid, Some(outage), &inj);
            for l in 0..flows.len() {
                prop_assert!((flows[l] - oracle[l]).abs() <= 1e-8,
                    "line {}: {} vs oracle {}", l + 1, flows[l], oracle[l]);
            }
        }
    }
}
