use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod output;

use config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "qlmass", version, about = "Quasi-local mass experiments in spatial Schwarzschild")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment configuration (JSON). Built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `outputs.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Reserved for randomised perturbation phases; currently unused.
    #[arg(long)]
    seed: Option<u64>,
    /// Progress on stderr.
    #[arg(long)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the flow with the coupled extension and write the mass report.
    FlowRun(Common),
    /// Compare the 2D pipeline with the symmetric oracle on round data.
    OracleCheck(Common),
    /// Tabulate Φ(m) for a round sphere and locate its minimum.
    PhiCurve(Common),
    /// Inequality margins for round annulus fill-ins.
    AnnulusSweep(Common),
    /// Large-sphere limits of the quasi-local energy and volume deficit.
    Limits(Common),
    /// Recompute the monotonicity audit from a trajectory CSV.
    Audit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trajectory: PathBuf,
    },
}

/// Why a command did not succeed.
#[derive(Debug)]
pub enum Failure {
    /// Bad configuration; exit 2.
    Config(String),
    /// Named checks that failed; exit 1.
    Checks(Vec<String>),
    /// Anything else that stopped the run; exit 1.
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

pub struct Context {
    pub cfg: ExperimentConfig,
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub verbose: bool,
}

impl Context {
    fn new(common: &Common) -> Result<Self, Failure> {
        let cfg = ExperimentConfig::load(common.config.as_deref())?;
        let out_dir = common
            .out
            .clone()
            .unwrap_or_else(|| PathBuf::from(&cfg.outputs.directory));
        Ok(Self {
            cfg,
            out_dir,
            seed: common.seed,
            verbose: common.verbose,
        })
    }

    pub fn log(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::FlowRun(c) => Context::new(c).and_then(|ctx| commands::flow_run(&ctx)),
        Command::OracleCheck(c) => Context::new(c).and_then(|ctx| commands::oracle_check(&ctx)),
        Command::PhiCurve(c) => Context::new(c).and_then(|ctx| commands::phi_curve(&ctx)),
        Command::AnnulusSweep(c) => Context::new(c).and_then(|ctx| commands::annulus_sweep(&ctx)),
        Command::Limits(c) => Context::new(c).and_then(|ctx| commands::limits(&ctx)),
        Command::Audit { common, trajectory } => {
            Context::new(common).and_then(|ctx| commands::audit(&ctx, trajectory))
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Checks(names)) => {
            eprintln!("failed checks: {}", names.join(", "));
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
