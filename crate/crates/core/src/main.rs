//! CLI entry point: reproducible experiment runs from scenario configs or
//! bundled presets.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use szegolab::config::ScenarioConfig;
use szegolab::hardy::HaarConvention;
use szegolab::runner::{run_asymptotics, run_dims, run_immersion, run_reduction_scan, RunReport};
use szegolab::scenario::{preset, PRESET_NAMES};

/// Equivariant kernel laboratory: isotype dimensions, scaling asymptotics,
/// immersion checks and reduction scans on model projective spaces.
///
/// Set SZEGOLAB_CACHE to a directory to persist isotype bases between runs.
#[derive(Parser)]
#[command(name = "szegolab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Isotype dimensions by enumeration vs character quadrature.
    Dims(RunArgs),
    /// Diagonal kernel sweep: fitted exponent, constant and remainder rate.
    Asymptotics(RunArgs),
    /// Pullback metric and Laplacian sweeps with the three verdicts.
    Immersion(RunArgs),
    /// Locus scan: varsigma, Psi, margins and frame diagnostics per seed.
    ReductionScan(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario config file (key = value format).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Bundled preset name.
    #[arg(long, value_parser = PRESET_NAMES)]
    preset: Option<String>,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for k-sweeps.
    #[arg(long)]
    threads: Option<usize>,
    /// Haar normalization for the projector convention (prob | phi).
    #[arg(long, value_parser = ["prob", "phi"])]
    haar: Option<String>,
}

impl RunArgs {
    fn scenario(&self) -> szegolab::Result<ScenarioConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), None) => {
                let text = std::fs::read_to_string(path)?;
                let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("config");
                ScenarioConfig::parse(name, &text)?
            }
            (None, Some(name)) => preset(name)?,
            _ => {
                return Err(szegolab::Error::Config(
                    "exactly one of --config or --preset is required".into(),
                ))
            }
        };
        if let Some(out) = &self.out {
            cfg.outputs = out.clone();
        }
        if let Some(h) = &self.haar {
            cfg.haar = if h == "phi" {
                HaarConvention::PhiInduced
            } else {
                HaarConvention::Probability
            };
        }
        if let Some(n) = self.threads {
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global().ok();
        }
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, run): (&RunArgs, fn(&ScenarioConfig) -> szegolab::Result<RunReport>) =
        match &cli.command {
            Command::Dims(a) => (a, run_dims),
            Command::Asymptotics(a) => (a, run_asymptotics),
            Command::Immersion(a) => (a, run_immersion),
            Command::ReductionScan(a) => (a, run_reduction_scan),
        };
    let cfg = match args.scenario() {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&cfg) {
        Ok(report) => {
            println!("{}", report.summary);
            if report.passed {
                println!("{}: PASS", cfg.name);
                ExitCode::SUCCESS
            } else {
                println!("{}: FAIL", cfg.name);
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
