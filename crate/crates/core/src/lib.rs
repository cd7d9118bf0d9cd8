//! Core library for gridbench: grid modeling, DC power flow sensitivities,
//! demand and contingency scenario generation, a convex QP solver, rolling
//! look-ahead dispatch, and violation/cost metrics.

pub mod cluster;
pub mod dispatch;
pub mod grid;
pub mod metrics;
pub mod ptdf;
pub mod qp;
pub mod rng;
pub mod scenario;

pub use cluster::{kmeans, ClusterError, KmeansResult};
pub use dispatch::{
    load_external_trajectory, reference_policy, save_external_trajectories, solve_baseline,
    DispatchError, DispatchPolicy, DispatchTrajectory, LookAheadConfig, PolicyContext,
    ReferenceKind,
};
pub use grid::{
    load_case, Bus, BusId, GridError, GridModel, LineId, ThermalUnit, TransmissionLine, UnitId,
};
pub use metrics::{
    aggregate, compute_violations, scenario_metrics, trajectory_cost, AggregateMetrics,
    MetricsError, ScenarioMetrics, ViolationTensor,
};
pub use ptdf::{compute_ptdf, PowerFlowError, PtdfMatrix, Topology};
pub use qp::{solve, ConvexProgram, QpSession, Solution, SolveStatus, SolverError, SolverOptions};
pub use rng::{derive_seed, rng_for, scenario_stream};
pub use scenario::{
    cluster_observations, compute_observation_vector, generate_demand_scenarios, load_demand_csv,
    select_network_scenarios, ClusterAssignment, DemandScenario, DemandSeries, NetworkScenario,
    ObservationVector, ScenarioError,
};
