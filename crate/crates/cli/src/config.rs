//! Run configuration: one TOML document describing the case, the horizon,
//! the scenario sweep, and the policies to score. Command-line flags only
//! override the output directory and log verbosity so a run is fully
//! reproducible from the config file alone.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {message}")]
    Parse { path: String, message: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Case file path, relative to the config file's directory.
    pub case: PathBuf,
    /// Demand CSV path, relative to the config file's directory.
    pub demand: PathBuf,
    /// Master seed; every random stream in the run derives from it.
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Worker threads for the scenario sweep; 0 means one per core.
    #[serde(default)]
    pub workers: usize,
    pub horizon: HorizonConfig,
    pub demand_scenarios: DemandScenarioConfig,
    /// Absent means no N-1 clustering: the sweep runs on the intact
    /// network only.
    #[serde(default)]
    pub clustering: Option<ClusteringConfig>,
    pub policies: Vec<PolicyConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonConfig {
    /// Number of dispatch windows.
    pub n_t: usize,
    /// Slots per look-ahead window.
    pub n_tau: usize,
    #[serde(default = "default_slot_minutes")]
    pub slot_minutes: u32,
    /// Fleet output before the first window; defaults to each unit's p_min.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_output_mw: Option<Vec<f64>>,
}

fn default_slot_minutes() -> u32 {
    15
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandScenarioConfig {
    pub count: usize,
    pub low: f64,
    pub high: f64,
    #[serde(default)]
    pub noise_sigma: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusteringConfig {
    pub k: usize,
    /// "auto" picks the most utilised lines from the intact baseline;
    /// an explicit id list pins them.
    #[serde(default)]
    pub key_lines: KeyLineSpec,
    /// Line whose cluster becomes the evaluated network scenario set.
    pub trained_outage: u32,
    /// Candidate outages; defaults to every non-islanding line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contingency_lines: Option<Vec<u32>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KeyLineSpec {
    Mode(String),
    Lines(Vec<u32>),
}

impl Default for KeyLineSpec {
    fn default() -> Self {
        KeyLineSpec::Mode("auto".into())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicyConfig {
    /// Replays the baseline; scores the harness itself.
    Oracle,
    /// Baseline with multiplicative Gaussian noise of the given sigma.
    Perturbed { sigma: f64 },
    /// Splits slot demand across units proportionally to capacity.
    Proportional,
    /// Trajectory bundle produced by an external agent, relative to the
    /// config file's directory.
    External { path: PathBuf },
}

impl PolicyConfig {
    pub fn describe(&self) -> String {
        match self {
            PolicyConfig::Oracle => "oracle".into(),
            PolicyConfig::Perturbed { sigma } => format!("perturbed sigma={sigma}"),
            PolicyConfig::Proportional => "proportional".into(),
            PolicyConfig::External { path } => format!("external {}", path.display()),
        }
    }
}

/// Parses a config file; validation is separate so callers can collect
/// every diagnostic at once.
pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    toml::from_str(&text).map_err(|e| ConfigError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Resolves a config-relative path against the config file's directory.
pub fn resolve(base_dir: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base_dir.join(path)
    }
}

/// Checks every config invariant and referenced file, returning all
/// problems at once. An empty list means the config is runnable.
pub fn validate(config: &RunConfig, base_dir: &Path) -> Vec<String> {
    let mut problems = Vec::new();

    let case_path = resolve(base_dir, &config.case);
    if !case_path.is_file() {
        problems.push(format!("case file not found: {}", case_path.display()));
    }
    let demand_path = resolve(base_dir, &config.demand);
    if !demand_path.is_file() {
        problems.push(format!("demand file not found: {}", demand_path.display()));
    }

    if config.horizon.n_t < 1 {
        problems.push("horizon.n_t must be >= 1".into());
    }
    if config.horizon.n_tau < 1 {
        problems.push("horizon.n_tau must be >= 1".into());
    }
    if config.horizon.slot_minutes < 1 {
        problems.push("horizon.slot_minutes must be >= 1".into());
    }
    if let Some(init) = &config.horizon.initial_output_mw {
        if init.iter().any(|v| !v.is_finite() || *v < 0.0) {
            problems.push("horizon.initial_output_mw entries must be finite and >= 0".into());
        }
    }

    let d = &config.demand_scenarios;
    if d.count < 1 {
        problems.push("demand_scenarios.count must be >= 1".into());
    }
    if !(d.low > 0.0 && d.low <= d.high) || !d.low.is_finite() || !d.high.is_finite() {
        problems.push(format!(
            "demand_scenarios range must satisfy 0 < low <= high, got [{}, {}]",
            d.low, d.high
        ));
    }
    if !(d.noise_sigma >= 0.0) || !d.noise_sigma.is_finite() {
        problems.push(format!(
            "demand_scenarios.noise_sigma must be >= 0, got {}",
            d.noise_sigma
        ));
    }

    if let Some(c) = &config.clustering {
        if c.k < 1 {
            problems.push("clustering.k must be >= 1".into());
        }
        match &c.key_lines {
            KeyLineSpec::Mode(mode) if mode != "auto" => {
                problems.push(format!(
                    "clustering.key_lines must be \"auto\" or a list of line ids, got \"{mode}\""
                ));
            }
            KeyLineSpec::Lines(lines) => {
                if lines.is_empty() {
                    problems.push("clustering.key_lines list must not be empty".into());
                }
                let mut seen = lines.clone();
                seen.sort_unstable();
                seen.dedup();
                if seen.len() != lines.len() {
                    problems.push("clustering.key_lines contains duplicate ids".into());
                }
            }
            KeyLineSpec::Mode(_) => {}
        }
        if c.trained_outage < 1 {
            problems.push("clustering.trained_outage must be a 1-based line id".into());
        }
        if let Some(lines) = &c.contingency_lines {
            if lines.is_empty() {
                problems.push("clustering.contingency_lines must not be empty when given".into());
            }
            let mut seen = lines.clone();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() != lines.len() {
                problems.push("clustering.contingency_lines contains duplicate ids".into());
            }
        }
    }

    if config.policies.is_empty() {
        problems.push("at least one policy is required".into());
    }
    for (ix, policy) in config.policies.iter().enumerate() {
        match policy {
            PolicyConfig::Perturbed { sigma } => {
                if !(*sigma >= 0.0) || !sigma.is_finite() {
                    problems.push(format!(
                        "policy {}: perturbed sigma must be >= 0, got {sigma}",
                        ix + 1
                    ));
                }
            }
            PolicyConfig::External { path } => {
                let p = resolve(base_dir, path);
                if !p.is_file() {
                    problems.push(format!(
                        "policy {}: external trajectory file not found: {}",
                        ix + 1,
                        p.display()
                    ));
                }
            }
            PolicyConfig::Oracle | PolicyConfig::Proportional => {}
        }
    }

    // Deeper cross-checks only make sense once the inputs parse; any
    // failure here would otherwise surface mid-run.
    if case_path.is_file() {
        match gridbench_core::load_case(&case_path) {
            Err(e) => problems.push(e.to_string()),
            Ok(grid) => {
                if let Some(init) = &config.horizon.initial_output_mw {
                    if init.len() != grid.n_units() {
                        problems.push(format!(
                            "horizon.initial_output_mw has {} entries, case has {} units",
                            init.len(),
                            grid.n_units()
                        ));
                    }
                }
                if let Some(c) = &config.clustering {
                    let known = |id: u32| id >= 1 && (id as usize) <= grid.n_lines();
                    if !known(c.trained_outage) {
                        problems.push(format!(
                            "clustering.trained_outage {} is not a line of the case",
                            c.trained_outage
                        ));
                    }
                    if let KeyLineSpec::Lines(lines) = &c.key_lines {
                        for id in lines.iter().filter(|id| !known(**id)) {
                            problems
                                .push(format!("clustering.key_lines id {id} is not a line"));
                        }
                    }
                    if let Some(lines) = &c.contingency_lines {
                        for id in lines.iter().filter(|id| !known(**id)) {
                            problems.push(format!(
                                "clustering.contingency_lines id {id} is not a line"
                            ));
                        }
                    }
                }
                if demand_path.is_file() {
                    match gridbench_core::load_demand_csv(&demand_path) {
                        Err(e) => problems.push(e.to_string()),
                        Ok(demand) => {
                            if demand.n_buses() != grid.n_buses() {
                                problems.push(format!(
                                    "demand file covers {} buses, case has {}",
                                    demand.n_buses(),
                                    grid.n_buses()
                                ));
                            }
                            let needed = config.horizon.n_t + config.horizon.n_tau.max(1) - 1;
                            if config.horizon.n_t >= 1
                                && config.horizon.n_tau >= 1
                                && demand.n_slots() < needed
                            {
                                problems.push(format!(
                                    "demand file has {} slots, horizon needs {}",
                                    demand.n_slots(),
                                    needed
                                ));
                            }
                        }
                    }
                }
            }
        }
    }

    problems
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_toml() -> String {
        r#"
case = "case.json"
demand = "demand.csv"
seed = 7
output_dir = "out"

[horizon]
n_t = 2
n_tau = 2

[demand_scenarios]
count = 3
low = 0.9
high = 1.1

[[policies]]
kind = "oracle"
"#
        .to_string()
    }

    #[test]
    fn parses_minimal_config() {
        let config: RunConfig = toml::from_str(&minimal_toml()).unwrap();
        assert_eq!(config.seed, 7);
        assert_eq!(config.horizon.slot_minutes, 15);
        assert_eq!(config.demand_scenarios.noise_sigma, 0.0);
        assert!(config.clustering.is_none());
        assert_eq!(config.workers, 0);
        assert!(matches!(config.policies[0], PolicyConfig::Oracle));
    }

    #[test]
    fn parses_clustering_and_policy_variants() {
        let text = minimal_toml()
            + r#"
[clustering]
k = 4
trained_outage = 10
key_lines = [1, 2]

[[policies]]
kind = "perturbed"
sigma = 0.02

[[policies]]
kind = "external"
path = "agent.json"
"#;
        let config: RunConfig = toml::from_str(&text).unwrap();
        let c = config.clustering.as_ref().unwrap();
        assert_eq!(c.k, 4);
        assert!(matches!(&c.key_lines, KeyLineSpec::Lines(l) if l == &vec![1, 2]));
        assert_eq!(config.policies.len(), 3);
    }

    #[test]
    fn unknown_fields_rejected() {
        // Top of the document, before any table, so the key lands on the
        // root struct.
        let text = "unknown_knob = 3\n".to_string() + &minimal_toml();
        assert!(toml::from_str::<RunConfig>(&text).is_err());
    }

    #[test]
    fn validate_collects_all_problems_at_once() {
        let mut config: RunConfig = toml::from_str(&minimal_toml()).unwrap();
        config.horizon.n_tau = 0;
        config.demand_scenarios.low = 1.5; // low > high
        config.demand_scenarios.high = 1.1;
        let dir = tempfile::tempdir().unwrap();
        let problems = validate(&config, dir.path());
        assert!(problems.iter().any(|p| p.contains("case file not found")), "{problems:?}");
        assert!(problems.iter().any(|p| p.contains("demand file not found")), "{problems:?}");
        assert!(problems.iter().any(|p| p.contains("n_tau")), "{problems:?}");
        assert!(problems.iter().any(|p| p.contains("low <= high")), "{problems:?}");
        assert!(problems.len() >= 4);
    }

    #[test]
    fn validate_passes_on_consistent_inputs() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("case.json"),
            r#"{
  "name": "pair",
  "base_mva": 100.0,
  "buses": [{"id": 1, "slack": true}, {"id": 2}],
  "lines": [{"id": 1, "from": 1, "to": 2, "susceptance_pu": 10.0, "flow_limit_mw": 100.0}],
  "units": [{"id": 1, "bus": 1, "p_min_mw": 0.0, "p_max_mw": 50.0,
             "ramp_up_mw": 20.0, "ramp_down_mw": 20.0,
             "cost_a": 0.01, "cost_b": 5.0, "cost_c": 0.0}]
}"#,
        )
        .unwrap();
        std::fs::write(
            dir.path().join("demand.csv"),
            "bus_1,bus_2\n0.0,10.0\n0.0,11.0\n0.0,12.0\n",
        )
        .unwrap();
        let config: RunConfig = toml::from_str(&minimal_toml()).unwrap();
        let problems = validate(&config, dir.path());
        assert!(problems.is_empty(), "{problems:?}");
    }

    #[test]
    fn validate_flags_bad_cross_references() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("case.json"),
            r#"{
  "name": "pair",
  "base_mva": 100.0,
  "buses": [{"id": 1, "slack": true}, {"id": 2}],
  "lines": [{"id": 1, "from": 1, "to": 2, "susceptance_pu": 10.0, "flow_limit_mw": 100.0}],
  "units": [{"id": 1, "bus": 1, "p_min_mw": 0.0, "p_max_mw": 50.0,
             "ramp_up_mw": 20.0, "ramp_down_mw": 20.0,
             "cost_a": 0.01, "cost_b": 5.0, "cost_c": 0.0}]
}"#,
        )
        .unwrap();
        std::fs::write(dir.path().join("demand.csv"), "bus_1\n1.0\n").unwrap();
        let text = minimal_toml()
            + r#"
[clustering]
k = 2
trained_outage = 9
"#;
        let config: RunConfig = toml::from_str(&text).unwrap();
        let problems = validate(&config, dir.path());
        assert!(problems.iter().any(|p| p.contains("trained_outage 9")), "{problems:?}");
        assert!(problems.iter().any(|p| p.contains("covers 1 buses")), "{problems:?}");
    }
}
