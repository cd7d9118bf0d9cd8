//! Report and manifest writing.
//!
//! All artifacts are assembled in memory first and written in one pass at
//! the end of a run; if any write fails, files created so far are removed
//! so a failed run leaves nothing half-finished behind. Numbers serialize
//! through the shortest round-trip float formatting, which makes byte
//! identity across runs a direct consequence of value identity.

use crate::config::RunConfig;
use crate::pipeline::{Manifest, PolicyReport, RunOutputs, ScenarioRow, SeedInfo};
use gridbench_core::AggregateMetrics;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Serialize)]
struct ManifestDoc<'a> {
    config: &'a RunConfig,
    #[serde(flatten)]
    manifest: &'a Manifest,
}

#[derive(Serialize)]
struct ReportDoc<'a> {
    policy: &'a str,
    config: &'a RunConfig,
    seeds: &'a SeedInfo,
    aggregate: Option<&'a AggregateMetrics>,
    scenarios: &'a [ScenarioRow],
}

/// File-name-safe variant of a policy name, deduplicated with a numeric
/// suffix when two policies collide.
pub fn policy_slugs(names: &[String]) -> Vec<String> {
    let mut slugs: Vec<String> = Vec::with_capacity(names.len());
    for name in names {
        let mut slug: String = name
            .chars()
            .map(|c| {
                let c = c.to_ascii_lowercase();
                if c.is_ascii_alphanumeric() || c == '.' || c == '_' || c == '-' {
                    c
                } else {
                    '-'
                }
            })
            .collect();
        if slug.is_empty() {
            slug = "policy".into();
        }
        if slugs.contains(&slug) {
            let mut n = 2;
            while slugs.contains(&format!("{slug}-{n}")) {
                n += 1;
            }
            slug = format!("{slug}-{n}");
        }
        slugs.push(slug);
    }
    slugs
}

fn report_csv(report: &PolicyReport) -> String {
    let mut text = String::from("s_t,s_d,rce,rvs,rvm,nvc,nvt,feasible,outage_line,coefficient\n");
    for row in &report.rows {
        let outage = row
            .outage_line
            .map(|l| l.to_string())
            .unwrap_or_default();
        if row.metrics.feasible_baseline {
            let m = &row.metrics;
            writeln!(
                text,
                "{},{},{},{},{},{},{},true,{},{}",
                row.s_t, row.s_d, m.rce, m.rvs, m.rvm, m.nvc, m.nvt, outage, row.coefficient
            )
            .unwrap();
        } else {
            writeln!(
                text,
                "{},{},,,,,,false,{},{}",
                row.s_t, row.s_d, outage, row.coefficient
            )
            .unwrap();
        }
    }
    text
}

/// Per-demand-coefficient series for one (policy, network scenario) pair;
/// skipped scenarios are left out of the series.
fn plot_csv(report: &PolicyReport, s_t: u32) -> String {
    let mut text = String::from("s_d,coefficient,rce,nvt,rvm\n");
    for row in report.rows.iter().filter(|r| r.s_t == s_t) {
        if row.metrics.feasible_baseline {
            writeln!(
                text,
                "{},{},{},{},{}",
                row.s_d, row.coefficient, row.metrics.rce, row.metrics.nvt, row.metrics.rvm
            )
            .unwrap();
        }
    }
    text
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string_pretty(value)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| e.to_string())
}

struct Writer {
    written: Vec<PathBuf>,
}

impl Writer {
    fn write(&mut self, path: PathBuf, content: &str) -> Result<(), String> {
        match std::fs::write(&path, content) {
            Ok(()) => {
                self.written.push(path);
                Ok(())
            }
            Err(e) => Err(format!("cannot write {}: {e}", path.display())),
        }
    }

    fn cleanup(&self) {
        for path in &self.written {
            let _ = std::fs::remove_file(path);
        }
    }
}

/// Writes manifest, per-policy reports (JSON + CSV), per-network-scenario
/// plot series, and the run log. Returns every path written.
pub fn write_run(outputs: &RunOutputs, dir: &Path) -> Result<Vec<PathBuf>, String> {
    std::fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    let mut writer = Writer {
        written: Vec::new(),
    };
    let result = write_all(outputs, dir, &mut writer);
    if result.is_err() {
        writer.cleanup();
        return Err(result.unwrap_err());
    }
    Ok(writer.written)
}

fn write_all(outputs: &RunOutputs, dir: &Path, writer: &mut Writer) -> Result<(), String> {
    let manifest = ManifestDoc {
        config: &outputs.config_echo,
        manifest: &outputs.manifest,
    };
    writer.write(dir.join("manifest.json"), &to_json(&manifest)?)?;

    let names: Vec<String> = outputs.reports.iter().map(|r| r.policy.clone()).collect();
    let slugs = policy_slugs(&names);
    for (report, slug) in outputs.reports.iter().zip(&slugs) {
        let doc = ReportDoc {
            policy: &report.policy,
            config: &outputs.config_echo,
            seeds: &outputs.manifest.seeds,
            aggregate: report.aggregate.as_ref(),
            scenarios: &report.rows,
        };
        writer.write(dir.join(format!("report_{slug}.json")), &to_json(&doc)?)?;
        writer.write(dir.join(format!("report_{slug}.csv")), &report_csv(report))?;
        for scenario in &outputs.manifest.network_scenarios {
            writer.write(
                dir.join(format!("plot_{slug}_s{}.csv", scenario.id)),
                &plot_csv(report, scenario.id),
            )?;
        }
    }

    let mut log = outputs.log_lines.join("\n");
    log.push('\n');
    writer.write(dir.join("log.txt"), &log)?;
    Ok(())
}
