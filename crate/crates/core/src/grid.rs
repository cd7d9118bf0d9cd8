//! Network and fleet description: buses, transmission lines, thermal units.
//!
//! A [`GridModel`] is immutable after construction and safe to share across
//! concurrent scenario evaluations. All power quantities at this interface
//! are MW; line susceptances are per-unit on the case's MVA base.

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use thiserror::Error;

/// 1-based bus identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BusId(pub u32);

/// 1-based transmission line identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LineId(pub u32);

/// 1-based thermal unit identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UnitId(pub u32);

impl BusId {
    /// Zero-based position of this bus in `GridModel::buses`.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }
}

impl LineId {
    /// Zero-based position of this line in `GridModel::lines`.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }
}

impl UnitId {
    /// Zero-based position of this unit in `GridModel::units`.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }
}

impl fmt::Display for BusId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for LineId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for UnitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone)]
pub struct Bus {
    pub id: BusId,
    pub is_slack: bool,
}

#[derive(Debug, Clone)]
pub struct TransmissionLine {
    pub id: LineId,
    pub from_bus: BusId,
    pub to_bus: BusId,
    /// Per-unit series susceptance, > 0.
    pub susceptance: f64,
    /// Thermal limit in MW, > 0. Applies to |flow|.
    pub flow_limit: f64,
}

#[derive(Debug, Clone)]
pub struct ThermalUnit {
    pub id: UnitId,
    pub bus: BusId,
    pub p_min: f64,
    pub p_max: f64,
    /// Maximum output increase per slot, MW.
    pub ramp_up: f64,
    /// Maximum output decrease per slot, MW.
    pub ramp_down: f64,
    /// $/MW^2 per slot.
    pub cost_quadratic: f64,
    /// $/MW per slot.
    pub cost_linear: f64,
    /// $ per slot.
    pub cost_constant: f64,
}

impl ThermalUnit {
    /// Operating cost of this unit for one slot at output `p` MW.
    pub fn cost(&self, p: f64) -> f64 {
        self.cost_quadratic * p * p + self.cost_linear * p + self.cost_constant
    }
}

#[derive(Debug, Clone)]
pub struct GridModel {
    pub name: String,
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub lines: Vec<TransmissionLine>,
    pub units: Vec<ThermalUnit>,
    slack: BusId,
}

#[derive(Debug, Error)]
pub enum GridError {
    #[error("cannot read case file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("case file {path} is not valid grid JSON: {message}")]
    Parse { path: String, message: String },
    #[error("invalid grid '{grid}': {violation}")]
    Invalid { grid: String, violation: String },
}

impl GridError {
    fn invalid(grid: &str, violation: impl Into<String>) -> Self {
        GridError::Invalid {
            grid: grid.to_string(),
            violation: violation.into(),
        }
    }
}

// On-disk case schema. Unknown fields are rejected so a typo in a limit
// name fails loudly instead of silently loading defaults.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseFile {
    name: String,
    base_mva: f64,
    buses: Vec<CaseBus>,
    lines: Vec<CaseLine>,
    units: Vec<CaseUnit>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseBus {
    id: u32,
    #[serde(default)]
    slack: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseLine {
    id: u32,
    from: u32,
    to: u32,
    susceptance_pu: f64,
    flow_limit_mw: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseUnit {
    id: u32,
    bus: u32,
    p_min_mw: f64,
    p_max_mw: f64,
    ramp_up_mw: f64,
    ramp_down_mw: f64,
    cost_a: f64,
    cost_b: f64,
    cost_c: f64,
}

/// Loads and validates a grid case file (grid JSON schema).
pub fn load_case(path: impl AsRef<Path>) -> Result<GridModel, GridError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| GridError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let case: CaseFile = serde_json::from_str(&text).map_err(|e| GridError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    GridModel::from_parts(
        case.name,
        case.base_mva,
        case.buses
            .into_iter()
            .map(|b| Bus {
                id: BusId(b.id),
                is_slack: b.slack,
            })
            .collect(),
        case.lines
            .into_iter()
            .map(|l| TransmissionLine {
                id: LineId(l.id),
                from_bus: BusId(l.from),
                to_bus: BusId(l.to),
                susceptance: l.susceptance_pu,
                flow_limit: l.flow_limit_mw,
            })
            .collect(),
        case.units
            .into_iter()
            .map(|u| ThermalUnit {
                id: UnitId(u.id),
                bus: BusId(u.bus),
                p_min: u.p_min_mw,
                p_max: u.p_max_mw,
                ramp_up: u.ramp_up_mw,
                ramp_down: u.ramp_down_mw,
                cost_quadratic: u.cost_a,
                cost_linear: u.cost_b,
                cost_constant: u.cost_c,
            })
            .collect(),
    )
}

impl GridModel {
    /// Builds a grid from already-typed parts, checking every invariant.
    pub fn from_parts(
        name: String,
        base_mva: f64,
        buses: Vec<Bus>,
        lines: Vec<TransmissionLine>,
        units: Vec<ThermalUnit>,
    ) -> Result<Self, GridError> {
        if buses.is_empty() {
            return Err(GridError::invalid(&name, "grid has no buses"));
        }
        if base_mva <= 0.0 || !base_mva.is_finite() {
            return Err(GridError::invalid(
                &name,
                format!("base_mva must be positive and finite, got {base_mva}"),
            ));
        }

        let mut seen = HashSet::new();
        for (pos, bus) in buses.iter().enumerate() {
            if !seen.insert(bus.id) {
                return Err(GridError::invalid(
                    &name,
                    format!("duplicate bus id {}", bus.id),
                ));
            }
            if bus.id.0 as usize != pos + 1 {
                return Err(GridError::invalid(
                    &name,
                    format!(
                        "bus ids must be contiguous 1..{}: found id {} at position {}",
                        buses.len(),
                        bus.id,
                        pos + 1
                    ),
                ));
            }
        }
        let slacks: Vec<BusId> = buses.iter().filter(|b| b.is_slack).map(|b| b.id).collect();
        let slack = match slacks.as_slice() {
            [one] => *one,
            [] => return Err(GridError::invalid(&name, "no slack bus declared")),
            many => {
                return Err(GridError::invalid(
                    &name,
                    format!("more than one slack bus: {many:?}"),
                ))
            }
        };

        let n_buses = buses.len() as u32;
        let mut seen_lines = HashSet::new();
        for (pos, line) in lines.iter().enumerate() {
            if !seen_lines.insert(line.id) {
                return Err(GridError::invalid(
                    &name,
                    format!("duplicate line id {}", line.id),
                ));
            }
            if line.id.0 as usize != pos + 1 {
                return Err(GridError::invalid(
                    &name,
                    format!("line ids must be contiguous 1..{}", lines.len()),
                ));
            }
            for end in [line.from_bus, line.to_bus] {
                if end.0 == 0 || end.0 > n_buses {
                    return Err(GridError::invalid(
                        &name,
                        format!("line {} references unknown bus {}", line.id, end),
                    ));
                }
            }
            if line.from_bus == line.to_bus {
                return Err(GridError::invalid(
                    &name,
                    format!("line {} connects bus {} to itself", line.id, line.from_bus),
                ));
            }
            if !(line.susceptance > 0.0) || !line.susceptance.is_finite() {
                return Err(GridError::invalid(
                    &name,
                    format!(
                        "line {} susceptance must be > 0, got {}",
                        line.id, line.susceptance
                    ),
                ));
            }
            if !(line.flow_limit > 0.0) || !line.flow_limit.is_finite() {
                return Err(GridError::invalid(
                    &name,
                    format!(
                        "line {} flow_limit must be > 0, got {}",
                        line.id, line.flow_limit
                    ),
                ));
            }
        }

        let mut seen_units = HashSet::new();
        for (pos, unit) in units.iter().enumerate() {
            if !seen_units.insert(unit.id) {
                return Err(GridError::invalid(
                    &name,
                    format!("duplicate unit id {}", unit.id),
                ));
            }
            if unit.id.0 as usize != pos + 1 {
                return Err(GridError::invalid(
                    &name,
                    format!("unit ids must be contiguous 1..{}", units.len()),
                ));
            }
            if unit.bus.0 == 0 || unit.bus.0 > n_buses {
                return Err(GridError::invalid(
                    &name,
                    format!("unit {} references unknown bus {}", unit.id, unit.bus),
                ));
            }
            if !(0.0 <= unit.p_min && unit.p_min <= unit.p_max)
                || !unit.p_max.is_finite()
                || !(unit.p_max > 0.0)
            {
                return Err(GridError::invalid(
                    &name,
                    format!(
                        "unit {} limits must satisfy 0 <= p_min <= p_max with p_max > 0, got [{}, {}]",
                        unit.id, unit.p_min, unit.p_max
                    ),
                ));
            }
            if !(unit.ramp_up > 0.0) || !(unit.ramp_down > 0.0) {
                return Err(GridError::invalid(
                    &name,
                    format!("unit {} ramp limits must be > 0", unit.id),
                ));
            }
            if unit.cost_quadratic < 0.0 {
                return Err(GridError::invalid(
                    &name,
                    format!(
                        "unit {} quadratic cost must be >= 0, got {}",
                        unit.id, unit.cost_quadratic
                    ),
                ));
            }
        }

        let grid = GridModel {
            name,
            base_mva,
            buses,
            lines,
            units,
            slack,
        };
        if !grid.is_connected(None) {
            return Err(GridError::invalid(&grid.name, "graph is disconnected"));
        }
        Ok(grid)
    }

    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn n_lines(&self) -> usize {
        self.lines.len()
    }

    pub fn n_units(&self) -> usize {
        self.units.len()
    }

    pub fn slack(&self) -> BusId {
        self.slack
    }

    pub fn line(&self, id: LineId) -> &TransmissionLine {
        &self.lines[id.index()]
    }

    pub fn unit(&self, id: UnitId) -> &ThermalUnit {
        &self.units[id.index()]
    }

    /// Sum of `p_max` over the fleet, MW.
    pub fn total_capacity(&self) -> f64 {
        self.units.iter().map(|u| u.p_max).sum()
    }

    /// True when every bus is reachable from bus 1 with `skip` out of service.
    pub fn is_connected(&self, skip: Option<LineId>) -> bool {
        let n = self.n_buses();
        if n == 0 {
            return false;
        }
        let mut adjacency = vec![Vec::new(); n];
        for line in &self.lines {
            if Some(line.id) == skip {
                continue;
            }
            adjacency[line.from_bus.index()].push(line.to_bus.index());
            adjacency[line.to_bus.index()].push(line.from_bus.index());
        }
        let mut visited = vec![false; n];
        let mut stack = vec![0usize];
        visited[0] = true;
        let mut count = 1;
        while let Some(b) = stack.pop() {
            for &next in &adjacency[b] {
                if !visited[next] {
                    visited[next] = true;
                    count += 1;
                    stack.push(next);
                }
            }
        }
        count == n
    }

    /// Lines whose individual outage leaves the graph connected; these are
    /// the viable single-line contingencies.
    pub fn contingency_candidates(&self) -> Vec<LineId> {
        self.lines
            .iter()
            .map(|l| l.id)
            .filter(|&id| self.is_connected(Some(id)))
            .collect()
    }

    /// Checks that removing each listed line keeps the graph connected.
    pub fn validate_contingency_list(&self, outages: &[LineId]) -> Result<(), GridError> {
        let n_lines = self.n_lines() as u32;
        for &id in outages {
            if id.0 == 0 || id.0 > n_lines {
                return Err(GridError::invalid(
                    &self.name,
                    format!("contingency list references unknown line {id}"),
                ));
            }
            if !self.is_connected(Some(id)) {
                return Err(GridError::invalid(
                    &self.name,
                    format!("outage of line {id} disconnects the graph"),
                ));
            }
        }
        Ok(())
    }
}
