//! Command-line front end for gridbench: run configuration, the batch
//! evaluation pipeline, and report writing.

pub mod config;
pub mod output;
pub mod pipeline;

use clap::{Parser, Subcommand};
use config::{load_config, resolve, validate};
use pipeline::FailureKind;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "gridbench",
    version,
    about = "Batch evaluation harness for look-ahead economic dispatch policies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full evaluation pipeline described by a config file.
    Run {
        config: PathBuf,
        /// Override the configured output directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Suppress progress output.
        #[arg(short, long)]
        quiet: bool,
    },
    /// Check a config file and report every problem found.
    Validate { config: PathBuf },
    /// Solve all scenario baselines and write them in the trajectory
    /// exchange format.
    ExportBaseline {
        config: PathBuf,
        /// Output file; defaults to <output_dir>/baseline_trajectories.json.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Suppress progress output.
        #[arg(short, long)]
        quiet: bool,
    },
}

fn base_dir(config_path: &Path) -> &Path {
    match config_path.parent() {
        Some(parent) if !parent.as_os_str().is_empty() => parent,
        _ => Path::new("."),
    }
}

/// Loads and validates the config; prints diagnostics and returns `None`
/// when the run must not start.
fn checked_config(config_path: &Path) -> Option<config::RunConfig> {
    let config = match load_config(config_path) {
        Ok(config) => config,
        Err(e) => {
            eprintln!("config error: {e}");
            return None;
        }
    };
    let problems = validate(&config, base_dir(config_path));
    if !problems.is_empty() {
        for problem in &problems {
            eprintln!("config error: {problem}");
        }
        return None;
    }
    Some(config)
}

fn exit_code(kind: FailureKind) -> i32 {
    match kind {
        FailureKind::Config => 1,
        FailureKind::Runtime => 2,
    }
}

fn cmd_run(config_path: &Path, output_dir: Option<PathBuf>, quiet: bool) -> i32 {
    let Some(config) = checked_config(config_path) else {
        return 1;
    };
    let base = base_dir(config_path);
    let out_dir = output_dir.unwrap_or_else(|| resolve(base, &config.output_dir));
    match pipeline::run(&config, base, &out_dir, quiet) {
        Ok(summary) => {
            if !quiet {
                println!(
                    "done: {} policies, {} scored / {} skipped scenarios, {} files in {}",
                    summary.policies.len(),
                    summary.scored,
                    summary.skipped,
                    summary.files.len(),
                    summary.output_dir.display()
                );
            }
            if summary.all_infeasible {
                eprintln!("every scenario baseline is infeasible; see the report for details");
                3
            } else {
                0
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(e.kind)
        }
    }
}

fn cmd_validate(config_path: &Path) -> i32 {
    let config = match load_config(config_path) {
        Ok(config) => config,
        Err(e) => {
            eprintln!("config error: {e}");
            return 1;
        }
    };
    let problems = validate(&config, base_dir(config_path));
    if problems.is_empty() {
        println!("config ok: {}", config_path.display());
        0
    } else {
        for problem in &problems {
            eprintln!("config error: {problem}");
        }
        1
    }
}

fn cmd_export(config_path: &Path, output: Option<PathBuf>, quiet: bool) -> i32 {
    let Some(config) = checked_config(config_path) else {
        return 1;
    };
    let base = base_dir(config_path);
    let out_path = output.unwrap_or_else(|| {
        resolve(base, &config.output_dir).join("baseline_trajectories.json")
    });
    match pipeline::export_baseline(&config, base, &out_path, quiet) {
        Ok(summary) => {
            if summary.all_infeasible {
                eprintln!("every scenario baseline is infeasible; nothing to export");
                return 3;
            }
            if !quiet {
                println!(
                    "exported {} baseline trajectories ({} skipped) to {}",
                    summary.scenarios,
                    summary.skipped,
                    summary.path.display()
                );
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(e.kind)
        }
    }
}

/// Entry point; returns the process exit code.
pub fn run_cli() -> i32 {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            output_dir,
            quiet,
        } => cmd_run(&config, output_dir, quiet),
        Command::Validate { config } => cmd_validate(&config),
        Command::ExportBaseline {
            config,
            output,
            quiet,
        } => cmd_export(&config, output, quiet),
    }
}
