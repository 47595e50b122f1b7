//! `thermolab`: runs the experiment catalog from declarative configs.
//!
//! Exit status: 0 on success, 1 on a failed check or run, 2 on a config or
//! usage error, 3 when a trajectory turns non-finite.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod experiments;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use config::{ConfigError, ExperimentConfig};
use experiments::{Ctx, RunError, CATALOG};
use output::{OutputDir, RunManifest};

const THREADS_VAR: &str = "THERMOLAB_THREADS";

#[derive(Parser)]
#[command(name = "thermolab", version, about = "Thermostatted oscillator experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Use the published step budgets instead of the desk-scale ones.
        #[arg(long)]
        paper_scale: bool,
        /// Output directory (overrides `output` in the config).
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// List the experiment catalog.
    List,
    /// Run the diagnostics suite; fails if any invariant is violated.
    Check,
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("{THREADS_VAR} must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| format!("cannot size the worker pool: {e}"))
}

fn run(config_path: &Path, paper_scale: bool, out: Option<PathBuf>) -> ExitCode {
    let (cfg, text) = match ExperimentConfig::load(config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let Some(entry) = experiments::find(&cfg.experiment) else {
        let ids: Vec<&str> = CATALOG.iter().map(|e| e.id).collect();
        let e = ConfigError::at(
            config_path,
            &text,
            "experiment",
            format!(
                "unknown experiment `{}`; expected one of {}",
                cfg.experiment,
                ids.join(", ")
            ),
        );
        eprintln!("error: {e}");
        return ExitCode::from(2);
    };
    let dir = out
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(entry.id));

    let start = Instant::now();
    let mut ctx = Ctx::new(&cfg, &text, config_path, paper_scale);
    let mut files = OutputDir::new(&dir);
    let result = experiments::run(entry, &mut ctx, &mut files);

    let (status, code) = match &result {
        Ok(()) => ("ok", ExitCode::SUCCESS),
        Err(RunError::Config(e)) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e.nan_step() {
                Some(step) => {
                    ctx.warn(format!("aborted: non-finite state at step {step} ({e})"));
                    ("aborted", ExitCode::from(3))
                }
                None => {
                    ctx.warn(format!("failed: {e}"));
                    ("failed", ExitCode::FAILURE)
                }
            }
        }
    };

    let manifest = RunManifest {
        experiment: entry.id.to_string(),
        library_version: thermolab::VERSION,
        paper_scale,
        status: status.to_string(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        config_path: config_path.display().to_string(),
        config: serde_json::to_value(&cfg).unwrap_or(serde_json::Value::Null),
        parameters: serde_json::Value::Object(ctx.params.clone()),
        warnings: ctx.warnings.clone(),
        files: files.files().to_vec(),
    };
    if let Err(e) = manifest.write(&dir) {
        eprintln!("error: cannot write the manifest: {e}");
        return ExitCode::FAILURE;
    }
    for w in &ctx.warnings {
        eprintln!("warning: {w}");
    }
    if result.is_ok() {
        eprintln!("{}: wrote {} files to {}", entry.id, files.files().len(), dir.display());
    }
    code
}

fn check() -> ExitCode {
    let checks = match experiments::run_checks() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(if e.nan_step().is_some() { 3 } else { 1 });
        }
    };
    let failed = checks.iter().filter(|c| !c.pass).count();
    for c in &checks {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    println!("{} of {} checks passed", checks.len() - failed, checks.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match cli.command {
        Command::Run {
            config,
            paper_scale,
            out,
        } => run(&config, paper_scale, out),
        Command::List => {
            for e in CATALOG {
                println!("{:<24}{}", e.id, e.summary);
            }
            ExitCode::SUCCESS
        }
        Command::Check => check(),
    }
}
