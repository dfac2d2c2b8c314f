use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use entrosc_cli::config::ExperimentConfig;
use entrosc_cli::error::CliError;
use entrosc_cli::pipelines::{run_pipeline, Pipeline};

#[derive(Debug, Parser)]
#[command(name = "entrosc", version, about = "Entropy-per-length experiments for a damped wave equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML experiment config; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for snapshots and reports.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,

    /// Overrides `analysis.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads; all cores when omitted.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the burned-in ensemble and save a snapshot.
    Simulate,
    /// Coercive and decay functionals per member.
    Functionals,
    /// Weighted operator norms and high-momentum ratios.
    SpectralChecks,
    /// Sampling-series accuracy and truncation remainders.
    SamplingChecks,
    /// Cover marches, empirical counts and merge certificates.
    Cover,
    /// Entropy-per-length scan and ball growth.
    Entropy,
    /// Topological entropy estimate from trajectory bundles.
    TopoEntropy,
}

impl Command {
    fn pipeline(&self) -> Pipeline {
        match self {
            Command::Simulate => Pipeline::Simulate,
            Command::Functionals => Pipeline::Functionals,
            Command::SpectralChecks => Pipeline::SpectralChecks,
            Command::SamplingChecks => Pipeline::SamplingChecks,
            Command::Cover => Pipeline::Cover,
            Command::Entropy => Pipeline::Entropy,
            Command::TopoEntropy => Pipeline::TopoEntropy,
        }
    }
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.analysis.seed = seed;
    }
    if let Some(threads) = cli.threads {
        // only fails if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    run_pipeline(cli.command.pipeline(), &cfg, &cli.out_dir)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
