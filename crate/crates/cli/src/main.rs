//! `linksdf` command-line tool.
//!
//! Exit codes: 0 success, 1 the planner ran but failed (or a numerical
//! failure), 2 bad input. Errors are printed to stderr as one JSON object.

mod config;
mod manifest;
mod plan;
mod plotdata;
mod sdf;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct CliError {
    pub code: u8,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            kind: "input",
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            kind: "runtime",
            message: message.into(),
        }
    }
}

impl From<linksdf::Error> for CliError {
    fn from(e: linksdf::Error) -> Self {
        if e.is_input_error() {
            Self::input(e.to_string())
        } else {
            Self::runtime(e.to_string())
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "linksdf", version, about = "Learned robot SDFs and sampling-based trajectory planning")]
pub struct Cli {
    /// Run seed; every stage derives its own stream from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// TOML file overlaying the defaults of [sampling], [train], [planner],
    /// [cost] and [timing].
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample (point, distance, normal) triples around one link mesh.
    SynthDataset(sdf::SynthArgs),
    /// Fit a link network to a dataset.
    TrainSdf(sdf::TrainArgs),
    /// Per-band accuracy of link networks against the exact mesh distance.
    EvalSdf(sdf::EvalArgs),
    /// Plan a 2D point-mass trajectory.
    Plan2d(plan::Plan2dArgs),
    /// Plan a joint-space trajectory for a robot arm.
    PlanArm(plan::PlanArmArgs),
    /// Assign time-optimal timing to a trajectory.
    Timeparam(plan::TimeparamArgs),
    /// Re-hash the outputs listed in a manifest.
    VerifyManifest(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub manifest: PathBuf,
}

/// What a successful command reports back to `main`.
pub enum Outcome {
    Done,
    PlannerFailed,
}

fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let file_cfg = config::FileConfig::load(cli.config.as_deref())?;
    match &cli.command {
        Command::SynthDataset(a) => sdf::synth(cli, &file_cfg, a),
        Command::TrainSdf(a) => sdf::train(cli, &file_cfg, a),
        Command::EvalSdf(a) => sdf::eval(cli, a),
        Command::Plan2d(a) => plan::plan2d(cli, &file_cfg, a),
        Command::PlanArm(a) => plan::plan_arm(cli, &file_cfg, a),
        Command::Timeparam(a) => plan::timeparam(cli, &file_cfg, a),
        Command::VerifyManifest(a) => {
            let m = manifest::RunManifest::load(&a.manifest)?;
            let stale = m.stale_outputs();
            if stale.is_empty() {
                println!("{} outputs verified", m.outputs.len());
                Ok(Outcome::Done)
            } else {
                let list: Vec<String> = stale.iter().map(|p| p.display().to_string()).collect();
                Err(CliError::input(format!("outputs changed since the run: {}", list.join(", "))))
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    match run(&cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::PlannerFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": e }));
            ExitCode::from(e.code)
        }
    }
}
