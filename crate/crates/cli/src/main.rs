//! `hessian-lab`: runs named experiments and writes their artifacts.
//!
//! Exit status is 0 when every check passes, 1 when a check or a
//! computation fails and 2 when the configuration is invalid.

// `!(x > 0.0)` deliberately rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod experiments;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use config::{Experiment, ExperimentConfig, Preset};
use experiments::{Run, RunError};
use report::{RunInfo, Summary};

#[derive(Parser)]
#[command(name = "hessian-lab", version, about = "Experiments for complex Hessian equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the Dirichlet problem on a lattice.
    Solve(RunArgs),
    /// Fit the Hölder exponent of a solution and compare with the prediction.
    Holder(RunArgs),
    /// Volumes against capacities for a ball family.
    Capacity(RunArgs),
    /// Sublevel capacities and stability ratios for a bump family.
    Stability(RunArgs),
    /// Certify the m-subharmonic barriers and their envelope.
    Barriers(RunArgs),
    /// Run the fast invariant suite.
    Verify(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment configuration.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Output directory; overrides the one in the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Seed for sampled checks; overrides the one in the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Serialize)]
struct ValidationError<'a> {
    error: &'static str,
    message: &'a str,
}

fn invalid(message: &str) -> ExitCode {
    let body = ValidationError {
        error: "validation",
        message,
    };
    eprintln!("{}", serde_json::to_string(&body).expect("plain struct serializes"));
    ExitCode::from(2)
}

fn load(experiment: Experiment, args: &RunArgs) -> Result<ExperimentConfig, String> {
    let mut cfg = match (&args.config, args.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        (None, Some(p)) => ExperimentConfig::preset(p),
        (None, None) => ExperimentConfig::default_for(experiment),
    };
    if cfg.experiment != experiment {
        return Err(format!(
            "configuration is for '{}' but the subcommand is '{}'",
            cfg.experiment.name(),
            experiment.name()
        ));
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output = Some(out.display().to_string());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_json(path: &Path, value: &impl Serialize) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    text.push('\n');
    std::fs::write(path, text)
}

fn unix_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, args) = match &cli.command {
        Command::Solve(a) => (Experiment::Solve, a),
        Command::Holder(a) => (Experiment::Holder, a),
        Command::Capacity(a) => (Experiment::Capacity, a),
        Command::Stability(a) => (Experiment::Stability, a),
        Command::Barriers(a) => (Experiment::Barriers, a),
        Command::Verify(a) => (Experiment::Verify, a),
    };
    let cfg = match load(experiment, args) {
        Ok(cfg) => cfg,
        Err(msg) => return invalid(&msg),
    };
    let out = PathBuf::from(cfg.output.clone().unwrap_or_else(|| "out".into()));
    if let Err(e) = std::fs::create_dir_all(&out) {
        eprintln!("cannot create {}: {e}", out.display());
        return ExitCode::from(1);
    }

    let started = unix_ms();
    let clock = Instant::now();
    let mut run = Run::new(&cfg, &out);
    let result = run.execute();
    let info = RunInfo {
        version: env!("CARGO_PKG_VERSION"),
        started_unix_ms: started,
        finished_unix_ms: unix_ms(),
        elapsed_seconds: clock.elapsed().as_secs_f64(),
    };
    if let Err(e) = write_json(&out.join("run_info.json"), &info) {
        eprintln!("cannot write run_info.json: {e}");
        return ExitCode::from(1);
    }
    match result {
        Err(RunError::Invalid(msg)) => return invalid(&msg),
        Err(RunError::Failed { step, message }) => {
            eprintln!("failed: {step}: {message}");
            return ExitCode::from(1);
        }
        Ok(()) => {}
    }

    let mut files = std::mem::take(&mut run.files);
    files.push("run_info.json".into());
    let summary = Summary::new(cfg.clone(), files, std::mem::take(&mut run.checks));
    if let Err(e) = write_json(&out.join("summary.json"), &summary) {
        eprintln!("cannot write summary.json: {e}");
        return ExitCode::from(1);
    }
    for c in &summary.checks {
        let relation = match c.relation {
            report::Relation::AtMost => "<=",
            report::Relation::AtLeast => ">=",
        };
        println!(
            "{:<40} {:>12.4e} {relation} {:.4e} (tol {:.1e}) {}",
            c.name,
            c.value,
            c.bound,
            c.tolerance,
            if c.pass { "ok" } else { "FAIL" }
        );
    }
    let failed: Vec<&str> = summary.failures().map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("check failed: {}", failed.join(", "));
        ExitCode::from(1)
    }
}
