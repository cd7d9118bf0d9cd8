//! End-to-end orchestration: load inputs, generate scenarios, cluster N-1
//! cases, solve baselines, evaluate policies, and hand the assembled
//! artifacts to the output writer.
//!
//! Every random stream derives from the master seed with a fixed stream
//! id, so the whole run is a pure function of the config file and its
//! referenced inputs. The scenario sweep fans out one (network, demand)
//! chain per worker and joins in input order before aggregation.

use crate::config::{KeyLineSpec, PolicyConfig, RunConfig, resolve};
use crate::output;
use gridbench_core::dispatch::{demand_flow_offsets, unit_ptdf_columns};
use gridbench_core::{
    aggregate, cluster_observations, compute_observation_vector, compute_ptdf, derive_seed,
    generate_demand_scenarios, load_case, load_demand_csv, load_external_trajectory,
    reference_policy, save_external_trajectories, scenario_metrics, select_network_scenarios,
    solve_baseline, AggregateMetrics, DemandScenario, DemandSeries, DispatchError,
    DispatchPolicy, DispatchTrajectory, GridModel, LineId, LookAheadConfig, NetworkScenario,
    PolicyContext, ReferenceKind, ScenarioMetrics, SolverOptions,
};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Stream ids for seed derivation; fixed so artifacts are stable across
/// releases.
pub const DEMAND_STREAM: u64 = 1;
pub const CLUSTER_STREAM: u64 = 2;
/// All perturbed policies share one stream: with equal seeds the noise
/// draws of different sigmas are proportional, which makes degradation
/// comparisons across sigma exact rather than statistical.
pub const PERTURBED_STREAM: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    /// Bad configuration or inputs; exit code 1.
    Config,
    /// A stage failed mid-run; exit code 2.
    Runtime,
}

#[derive(Debug)]
pub struct PipelineError {
    pub stage: &'static str,
    pub kind: FailureKind,
    pub message: String,
}

impl std::fmt::Display for PipelineError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "stage {} failed: {}", self.stage, self.message)
    }
}

impl std::error::Error for PipelineError {}

fn config_err(stage: &'static str, message: impl ToString) -> PipelineError {
    PipelineError {
        stage,
        kind: FailureKind::Config,
        message: message.to_string(),
    }
}

fn runtime_err(stage: &'static str, message: impl ToString) -> PipelineError {
    PipelineError {
        stage,
        kind: FailureKind::Runtime,
        message: message.to_string(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedInfo {
    pub master: u64,
    pub demand_stream: u64,
    pub cluster_stream: u64,
    pub perturbed_stream: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CaseInfo {
    pub path: String,
    pub name: String,
    pub buses: usize,
    pub lines: usize,
    pub units: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct DemandInfo {
    pub path: String,
    pub buses: usize,
    pub slots: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct HorizonInfo {
    pub n_t: usize,
    pub n_tau: usize,
    pub slot_minutes: u32,
}

#[derive(Debug, Clone, Serialize)]
pub struct DemandScenarioInfo {
    pub id: u32,
    pub coefficient: f64,
    pub noise_seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AssignmentInfo {
    pub line: u32,
    pub cluster: usize,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExcludedOutage {
    pub line: u32,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClusteringInfo {
    pub k: usize,
    pub trained_outage: u32,
    pub key_lines: Vec<u32>,
    pub contingency_lines: Vec<u32>,
    pub assignments: Vec<AssignmentInfo>,
    pub excluded_outages: Vec<ExcludedOutage>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NetworkScenarioInfo {
    pub id: u32,
    pub outage_line: Option<u32>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SkipInfo {
    pub s_t: u32,
    pub s_d: u32,
    /// 1-based window at which the baseline became infeasible.
    pub window: usize,
    pub message: String,
}

/// Everything the run records about its own inputs and scenario set.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub case: CaseInfo,
    pub demand: DemandInfo,
    pub horizon: HorizonInfo,
    pub seeds: SeedInfo,
    pub demand_scenarios: Vec<DemandScenarioInfo>,
    pub clustering: Option<ClusteringInfo>,
    pub network_scenarios: Vec<NetworkScenarioInfo>,
    pub skipped_scenarios: Vec<SkipInfo>,
    pub policies: Vec<String>,
}

/// One report row; skipped scenarios carry a reason and zeroed metrics
/// flagged infeasible.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioRow {
    pub s_t: u32,
    pub s_d: u32,
    pub outage_line: Option<u32>,
    pub coefficient: f64,
    #[serde(flatten)]
    pub metrics: ScenarioMetrics,
    pub skip_reason: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PolicyReport {
    pub policy: String,
    pub rows: Vec<ScenarioRow>,
    /// Absent when no scenario had a feasible baseline.
    pub aggregate: Option<AggregateMetrics>,
}

pub struct RunOutputs {
    pub config_echo: RunConfig,
    pub manifest: Manifest,
    pub reports: Vec<PolicyReport>,
    pub log_lines: Vec<String>,
}

pub struct RunSummary {
    pub output_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub policies: Vec<String>,
    pub scored: usize,
    pub skipped: usize,
    pub all_infeasible: bool,
}

pub struct ExportSummary {
    pub path: PathBuf,
    pub scenarios: usize,
    pub skipped: usize,
    pub all_infeasible: bool,
}

struct Prepared {
    grid: GridModel,
    horizon: LookAheadConfig,
    demand_scenarios: Vec<DemandScenario>,
    network_scenarios: Vec<NetworkScenario>,
    clustering_info: Option<ClusteringInfo>,
    seeds: SeedInfo,
    case_info: CaseInfo,
    demand_info: DemandInfo,
    /// baselines[t_ix][d_ix]
    baselines: Vec<Vec<Result<DispatchTrajectory, SkipInfo>>>,
}

impl Prepared {
    fn skip_infos(&self) -> Vec<SkipInfo> {
        self.baselines
            .iter()
            .flatten()
            .filter_map(|b| b.as_ref().err().cloned())
            .collect()
    }
}

struct StageLog {
    lines: Vec<String>,
    quiet: bool,
}

impl StageLog {
    fn new(quiet: bool) -> Self {
        StageLog {
            lines: Vec::new(),
            quiet,
        }
    }

    fn note(&mut self, line: String) {
        if !self.quiet {
            println!("{line}");
        }
        self.lines.push(line);
    }

    fn stage(&mut self, name: &str, started: Instant, detail: String) {
        self.note(format!(
            "{name}: {detail} ({:.2}s)",
            started.elapsed().as_secs_f64()
        ));
    }
}

/// Mean |flow|/limit per line over every window slot of the trajectory.
fn line_utilization(
    grid: &GridModel,
    ptdf: &gridbench_core::PtdfMatrix,
    demand: &DemandSeries,
    trajectory: &DispatchTrajectory,
) -> Vec<f64> {
    let tu = unit_ptdf_columns(grid, ptdf);
    let td = demand_flow_offsets(ptdf, demand);
    let (n_t, n_tau) = (trajectory.n_t(), trajectory.n_tau());
    let mut sums = vec![0.0f64; grid.n_lines()];
    for t in 0..n_t {
        for tau in 0..n_tau {
            let slot = t + tau;
            for (l, line) in grid.lines.iter().enumerate() {
                let mut flow = -td[(l, slot)];
                for i in 0..grid.n_units() {
                    flow += tu[(l, i)] * trajectory.get(i, t, tau);
                }
                sums[l] += flow.abs() / line.flow_limit;
            }
        }
    }
    let denom = (n_t * n_tau) as f64;
    sums.iter().map(|s| s / denom).collect()
}

/// Picks the three most loaded lines of the intact baseline as key lines.
fn auto_key_lines(utilization: &[f64]) -> Vec<LineId> {
    let mut order: Vec<usize> = (0..utilization.len()).collect();
    order.sort_by(|&a, &b| {
        utilization[b]
            .partial_cmp(&utilization[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
        .into_iter()
        .take(3.min(utilization.len()))
        .map(|ix| LineId(ix as u32 + 1))
        .collect()
}

fn solver_options() -> SolverOptions {
    SolverOptions::default()
}

/// Baseline solve mapped to either a trajectory or a skip record; errors
/// other than plain infeasibility abort the run.
fn baseline_or_skip(
    grid: &GridModel,
    network: &NetworkScenario,
    demand: &DemandScenario,
    horizon: &LookAheadConfig,
    initial_output: &[f64],
) -> Result<Result<DispatchTrajectory, SkipInfo>, PipelineError> {
    match solve_baseline(
        grid,
        &network.ptdf,
        &demand.values,
        horizon,
        initial_output,
        &solver_options(),
    ) {
        Ok(trajectory) => Ok(Ok(trajectory)),
        Err(DispatchError::WindowInfeasible {
            window,
            constraint,
            violation,
        }) => Ok(Err(SkipInfo {
            s_t: network.id,
            s_d: demand.id,
            window,
            message: format!(
                "baseline window {window} infeasible: {constraint} violated by {violation:.3} MW"
            ),
        })),
        Err(e) => Err(runtime_err(
            "baselines",
            format!(
                "network scenario {} demand scenario {}: {e}",
                network.id, demand.id
            ),
        )),
    }
}

fn prepare(config: &RunConfig, base_dir: &Path, log: &mut StageLog) -> Result<Prepared, PipelineError> {
    let started = Instant::now();
    let case_path = resolve(base_dir, &config.case);
    let grid = load_case(&case_path).map_err(|e| config_err("case", e))?;
    let case_info = CaseInfo {
        path: config.case.display().to_string(),
        name: grid.name.clone(),
        buses: grid.n_buses(),
        lines: grid.n_lines(),
        units: grid.n_units(),
    };
    log.stage(
        "case",
        started,
        format!(
            "{} ({} buses, {} lines, {} units)",
            grid.name,
            grid.n_buses(),
            grid.n_lines(),
            grid.n_units()
        ),
    );

    let started = Instant::now();
    let demand_path = resolve(base_dir, &config.demand);
    let base_demand = load_demand_csv(&demand_path).map_err(|e| config_err("demand", e))?;
    if base_demand.n_buses() != grid.n_buses() {
        return Err(config_err(
            "demand",
            format!(
                "demand file covers {} buses, case has {}",
                base_demand.n_buses(),
                grid.n_buses()
            ),
        ));
    }
    let horizon = LookAheadConfig::new(
        config.horizon.n_t,
        config.horizon.n_tau,
        config.horizon.slot_minutes,
    )
    .map_err(|e| config_err("horizon", e))?;
    if base_demand.n_slots() < horizon.padded_slots() {
        return Err(config_err(
            "demand",
            format!(
                "demand file has {} slots, horizon needs {}",
                base_demand.n_slots(),
                horizon.padded_slots()
            ),
        ));
    }
    let demand_info = DemandInfo {
        path: config.demand.display().to_string(),
        buses: base_demand.n_buses(),
        slots: base_demand.n_slots(),
    };
    log.stage(
        "demand",
        started,
        format!(
            "{} slots x {} buses",
            base_demand.n_slots(),
            base_demand.n_buses()
        ),
    );

    let initial_output = match &config.horizon.initial_output_mw {
        Some(init) => {
            if init.len() != grid.n_units() {
                return Err(config_err(
                    "horizon",
                    format!(
                        "initial_output_mw has {} entries, case has {} units",
                        init.len(),
                        grid.n_units()
                    ),
                ));
            }
            init.clone()
        }
        None => grid.units.iter().map(|u| u.p_min).collect(),
    };

    let seeds = SeedInfo {
        master: config.seed,
        demand_stream: derive_seed(config.seed, DEMAND_STREAM),
        cluster_stream: derive_seed(config.seed, CLUSTER_STREAM),
        perturbed_stream: derive_seed(config.seed, PERTURBED_STREAM),
    };

    let started = Instant::now();
    let d = &config.demand_scenarios;
    let demand_scenarios = generate_demand_scenarios(
        &base_demand,
        d.count,
        d.low,
        d.high,
        d.noise_sigma,
        seeds.demand_stream,
    )
    .map_err(|e| config_err("demand-scenarios", e))?;
    log.stage(
        "demand-scenarios",
        started,
        format!(
            "{} coefficients in [{}, {}], noise sigma {}",
            d.count, d.low, d.high, d.noise_sigma
        ),
    );

    let started = Instant::now();
    let intact_ptdf = compute_ptdf(&grid, None).map_err(|e| runtime_err("clustering", e))?;
    let (network_scenarios, clustering_info) = match &config.clustering {
        None => {
            let scenarios = vec![NetworkScenario {
                id: 1,
                outage_line: None,
                ptdf: intact_ptdf.clone(),
            }];
            log.stage("clustering", started, "disabled, intact network only".into());
            (scenarios, None)
        }
        Some(c) => {
            let candidates: Vec<LineId> = match &c.contingency_lines {
                Some(ids) => {
                    let lines: Vec<LineId> = ids.iter().map(|id| LineId(*id)).collect();
                    grid.validate_contingency_list(&lines)
                        .map_err(|e| config_err("clustering", e))?;
                    lines
                }
                None => {
                    let lines = grid.contingency_candidates();
                    if lines.is_empty() {
                        return Err(config_err(
                            "clustering",
                            "no line can be outaged without islanding the network",
                        ));
                    }
                    lines
                }
            };
            let trained = LineId(c.trained_outage);
            if !candidates.contains(&trained) {
                return Err(config_err(
                    "clustering",
                    format!("trained_outage {trained} is not a contingency candidate"),
                ));
            }

            let intact_baseline = solve_baseline(
                &grid,
                &intact_ptdf,
                &base_demand,
                &horizon,
                &initial_output,
                &solver_options(),
            )
            .map_err(|e| runtime_err("clustering", format!("intact baseline: {e}")))?;

            let key_lines: Vec<LineId> = match &c.key_lines {
                KeyLineSpec::Lines(ids) => ids.iter().map(|id| LineId(*id)).collect(),
                KeyLineSpec::Mode(_) => {
                    let utilization =
                        line_utilization(&grid, &intact_ptdf, &base_demand, &intact_baseline);
                    auto_key_lines(&utilization)
                }
            };

            // One observation chain per candidate outage, in parallel.
            let observed: Vec<Result<Result<_, ExcludedOutage>, PipelineError>> = candidates
                .par_iter()
                .map(|&outage| {
                    let ptdf = compute_ptdf(&grid, Some(outage))
                        .map_err(|e| runtime_err("clustering", e))?;
                    match solve_baseline(
                        &grid,
                        &ptdf,
                        &base_demand,
                        &horizon,
                        &initial_output,
                        &solver_options(),
                    ) {
                        Ok(outage_baseline) => {
                            let vector = compute_observation_vector(
                                &grid,
                                outage,
                                &key_lines,
                                &intact_baseline,
                                &outage_baseline,
                                &base_demand,
                            )
                            .map_err(|e| runtime_err("clustering", e))?;
                            Ok(Ok(vector))
                        }
                        Err(DispatchError::WindowInfeasible { window, .. }) => {
                            Ok(Err(ExcludedOutage {
                                line: outage.0,
                                reason: format!("baseline window {window} infeasible"),
                            }))
                        }
                        Err(e) => Err(runtime_err(
                            "clustering",
                            format!("outage {outage} baseline: {e}"),
                        )),
                    }
                })
                .collect();

            let mut vectors = Vec::new();
            let mut excluded = Vec::new();
            for item in observed {
                match item? {
                    Ok(vector) => vectors.push(vector),
                    Err(ex) => excluded.push(ex),
                }
            }
            if excluded.iter().any(|e| e.line == trained.0) {
                return Err(config_err(
                    "clustering",
                    format!("trained_outage {trained} has no feasible baseline"),
                ));
            }
            if vectors.len() < c.k {
                return Err(config_err(
                    "clustering",
                    format!(
                        "k = {} exceeds the {} clusterable outages",
                        c.k,
                        vectors.len()
                    ),
                ));
            }

            let assignment = cluster_observations(&vectors, c.k, seeds.cluster_stream)
                .map_err(|e| runtime_err("clustering", e))?;
            let scenarios = select_network_scenarios(&assignment, trained, &grid)
                .map_err(|e| runtime_err("clustering", e))?;

            let info = ClusteringInfo {
                k: c.k,
                trained_outage: trained.0,
                key_lines: key_lines.iter().map(|l| l.0).collect(),
                contingency_lines: candidates.iter().map(|l| l.0).collect(),
                assignments: vectors
                    .iter()
                    .zip(&assignment.cluster)
                    .map(|(v, &cluster)| AssignmentInfo {
                        line: v.outage_line.0,
                        cluster,
                        features: v.features.clone(),
                    })
                    .collect(),
                excluded_outages: excluded,
            };
            log.stage(
                "clustering",
                started,
                format!(
                    "{} candidates, k={}, trained cluster has {} members",
                    candidates.len(),
                    c.k,
                    scenarios.len()
                ),
            );
            (scenarios, Some(info))
        }
    };

    let started = Instant::now();
    let pairs: Vec<(usize, usize)> = (0..network_scenarios.len())
        .flat_map(|t| (0..demand_scenarios.len()).map(move |d| (t, d)))
        .collect();
    let solved: Vec<Result<Result<DispatchTrajectory, SkipInfo>, PipelineError>> = pairs
        .par_iter()
        .map(|&(t_ix, d_ix)| {
            baseline_or_skip(
                &grid,
                &network_scenarios[t_ix],
                &demand_scenarios[d_ix],
                &horizon,
                &initial_output,
            )
        })
        .collect();
    let mut baselines: Vec<Vec<Result<DispatchTrajectory, SkipInfo>>> = network_scenarios
        .iter()
        .map(|_| Vec::with_capacity(demand_scenarios.len()))
        .collect();
    for (&(t_ix, _), item) in pairs.iter().zip(solved) {
        baselines[t_ix].push(item?);
    }
    let skipped = baselines
        .iter()
        .flatten()
        .filter(|b| b.is_err())
        .count();
    log.stage(
        "baselines",
        started,
        format!(
            "{} scenario chains solved, {} infeasible",
            pairs.len() - skipped,
            skipped
        ),
    );

    Ok(Prepared {
        grid,
        horizon,
        demand_scenarios,
        network_scenarios,
        clustering_info,
        seeds,
        case_info,
        demand_info,
        baselines,
    })
}

fn build_policies(
    config: &RunConfig,
    base_dir: &Path,
    prepared: &Prepared,
) -> Result<Vec<Box<dyn DispatchPolicy>>, PipelineError> {
    let mut policies: Vec<Box<dyn DispatchPolicy>> = Vec::new();
    for policy in &config.policies {
        let built: Box<dyn DispatchPolicy> = match policy {
            PolicyConfig::Oracle => reference_policy(ReferenceKind::Oracle, 0)
                .map_err(|e| config_err("policies", e))?,
            PolicyConfig::Perturbed { sigma } => reference_policy(
                ReferenceKind::Perturbed { sigma: *sigma },
                prepared.seeds.perturbed_stream,
            )
            .map_err(|e| config_err("policies", e))?,
            PolicyConfig::Proportional => reference_policy(ReferenceKind::Proportional, 0)
                .map_err(|e| config_err("policies", e))?,
            PolicyConfig::External { path } => {
                let resolved = resolve(base_dir, path);
                Box::new(
                    load_external_trajectory(&resolved, &prepared.grid, &prepared.horizon)
                        .map_err(|e| config_err("policies", e))?,
                )
            }
        };
        policies.push(built);
    }
    Ok(policies)
}

fn build_manifest(config: &RunConfig, prepared: &Prepared) -> Manifest {
    Manifest {
        case: prepared.case_info.clone(),
        demand: prepared.demand_info.clone(),
        horizon: HorizonInfo {
            n_t: prepared.horizon.n_t,
            n_tau: prepared.horizon.n_tau,
            slot_minutes: prepared.horizon.slot_minutes,
        },
        seeds: prepared.seeds.clone(),
        demand_scenarios: prepared
            .demand_scenarios
            .iter()
            .map(|s| DemandScenarioInfo {
                id: s.id,
                coefficient: s.coefficient,
                noise_seed: s.noise_seed,
            })
            .collect(),
        clustering: prepared.clustering_info.clone(),
        network_scenarios: prepared
            .network_scenarios
            .iter()
            .map(|s| NetworkScenarioInfo {
                id: s.id,
                outage_line: s.outage_line.map(|l| l.0),
            })
            .collect(),
        skipped_scenarios: prepared.skip_infos(),
        policies: config.policies.iter().map(|p| p.describe()).collect(),
    }
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool, PipelineError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| runtime_err("workers", e))
}

/// Full pipeline: prepare, evaluate every policy over the scenario sweep,
/// and write reports. Outputs are written only after every stage succeeds,
/// so a failed run leaves no partial artifacts.
pub fn run(
    config: &RunConfig,
    base_dir: &Path,
    out_dir: &Path,
    quiet: bool,
) -> Result<RunSummary, PipelineError> {
    let pool = thread_pool(config.workers)?;
    let mut log = StageLog::new(quiet);
    log.note(format!("seed: {}", config.seed));
    let prepared = pool.install(|| prepare(config, base_dir, &mut log))?;
    log.note(format!(
        "streams: demand {}, cluster {}, perturbed {}",
        prepared.seeds.demand_stream, prepared.seeds.cluster_stream, prepared.seeds.perturbed_stream
    ));
    let policies = build_policies(config, base_dir, &prepared)?;

    let started = Instant::now();
    let pairs: Vec<(usize, usize)> = (0..prepared.network_scenarios.len())
        .flat_map(|t| (0..prepared.demand_scenarios.len()).map(move |d| (t, d)))
        .collect();

    // One job per scenario pair; each evaluates every policy so the
    // baseline stays hot in cache. Results join in input order.
    type PairResult = Result<Vec<(ScenarioMetrics, Option<String>)>, PipelineError>;
    let evaluated: Vec<PairResult> = pool.install(|| {
        pairs
            .par_iter()
            .map(|&(t_ix, d_ix)| {
                let network = &prepared.network_scenarios[t_ix];
                let demand = &prepared.demand_scenarios[d_ix];
                match &prepared.baselines[t_ix][d_ix] {
                    Err(skip) => Ok(policies
                        .iter()
                        .map(|_| (ScenarioMetrics::skipped(), Some(skip.message.clone())))
                        .collect()),
                    Ok(baseline) => {
                        let ctx = PolicyContext {
                            grid: &prepared.grid,
                            config: &prepared.horizon,
                            network,
                            demand,
                            baseline,
                        };
                        policies
                            .iter()
                            .map(|policy| {
                                let trajectory = policy.trajectory(&ctx).map_err(|e| {
                                    runtime_err(
                                        "evaluate",
                                        format!(
                                            "policy {} on scenario ({}, {}): {e}",
                                            policy.name(),
                                            network.id,
                                            demand.id
                                        ),
                                    )
                                })?;
                                let metrics = scenario_metrics(
                                    &prepared.grid,
                                    &network.ptdf,
                                    &demand.values,
                                    &trajectory,
                                    baseline,
                                )
                                .map_err(|e| {
                                    runtime_err(
                                        "evaluate",
                                        format!(
                                            "policy {} on scenario ({}, {}): {e}",
                                            policy.name(),
                                            network.id,
                                            demand.id
                                        ),
                                    )
                                })?;
                                Ok((metrics, None))
                            })
                            .collect()
                    }
                }
            })
            .collect()
    });

    let mut reports: Vec<PolicyReport> = policies
        .iter()
        .map(|p| PolicyReport {
            policy: p.name().to_string(),
            rows: Vec::with_capacity(pairs.len()),
            aggregate: None,
        })
        .collect();
    for (&(t_ix, d_ix), outcome) in pairs.iter().zip(evaluated) {
        let outcome = outcome?;
        let network = &prepared.network_scenarios[t_ix];
        let demand = &prepared.demand_scenarios[d_ix];
        for (report, (metrics, skip_reason)) in reports.iter_mut().zip(outcome) {
            report.rows.push(ScenarioRow {
                s_t: network.id,
                s_d: demand.id,
                outage_line: network.outage_line.map(|l| l.0),
                coefficient: demand.coefficient,
                metrics,
                skip_reason,
            });
        }
    }
    for report in &mut reports {
        let metrics: Vec<ScenarioMetrics> = report.rows.iter().map(|r| r.metrics).collect();
        report.aggregate = aggregate(&metrics).ok();
    }

    let scored = reports
        .first()
        .map(|r| r.rows.iter().filter(|row| row.metrics.feasible_baseline).count())
        .unwrap_or(0);
    let skipped = pairs.len() - scored;
    let all_infeasible = scored == 0;
    log.stage(
        "evaluate",
        started,
        format!(
            "{} policies x {} scenarios ({} scored, {} skipped)",
            policies.len(),
            pairs.len(),
            scored,
            skipped
        ),
    );

    let manifest = build_manifest(config, &prepared);
    let policy_names: Vec<String> = reports.iter().map(|r| r.policy.clone()).collect();
    let outputs = RunOutputs {
        config_echo: config.clone(),
        manifest,
        reports,
        log_lines: log.lines.clone(),
    };

    let started = Instant::now();
    let files = output::write_run(&outputs, out_dir)
        .map_err(|e| runtime_err("write", e))?;
    log.stage("write", started, format!("{} files in {}", files.len(), out_dir.display()));

    Ok(RunSummary {
        output_dir: out_dir.to_path_buf(),
        files,
        policies: policy_names,
        scored,
        skipped,
        all_infeasible,
    })
}

/// Solves every scenario baseline and writes the bundle in the external
/// trajectory exchange format.
pub fn export_baseline(
    config: &RunConfig,
    base_dir: &Path,
    out_path: &Path,
    quiet: bool,
) -> Result<ExportSummary, PipelineError> {
    let pool = thread_pool(config.workers)?;
    let mut log = StageLog::new(quiet);
    let prepared = pool.install(|| prepare(config, base_dir, &mut log))?;

    let mut entries: BTreeMap<(u32, u32), DispatchTrajectory> = BTreeMap::new();
    let mut skipped = 0usize;
    for (t_ix, network) in prepared.network_scenarios.iter().enumerate() {
        for (d_ix, demand) in prepared.demand_scenarios.iter().enumerate() {
            match &prepared.baselines[t_ix][d_ix] {
                Ok(baseline) => {
                    entries.insert((network.id, demand.id), baseline.clone());
                }
                Err(_) => skipped += 1,
            }
        }
    }
    if entries.is_empty() {
        return Ok(ExportSummary {
            path: out_path.to_path_buf(),
            scenarios: 0,
            skipped,
            all_infeasible: true,
        });
    }

    if let Some(parent) = out_path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| runtime_err("write", format!("{}: {e}", parent.display())))?;
        }
    }
    save_external_trajectories(out_path, &prepared.grid, &prepared.horizon, &entries)
        .map_err(|e| runtime_err("write", e))?;
    log.note(format!(
        "wrote {} baseline trajectories to {}",
        entries.len(),
        out_path.display()
    ));

    Ok(ExportSummary {
        path: out_path.to_path_buf(),
        scenarios: entries.len(),
        skipped,
        all_infeasible: false,
    })
}
