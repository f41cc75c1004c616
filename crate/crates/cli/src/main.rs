#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

use commands::{CliError, RunConfig, SynthArgs};

/// Rank asset-pricing factor models by the Wasserstein distance of their
/// alpha distributions.
#[derive(Debug, Parser)]
#[command(name = "assetdist", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit every model, write report.csv ranked by AD and per-asset marginal files.
    Rank(DataArgs),
    /// AD over a grid of prior mispricing uncertainty for every model.
    Sweep {
        #[command(flatten)]
        data: DataArgs,
        /// Annualized sigma_alpha grid in percent.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0,2,4,6,8,10")]
        grid: Vec<f64>,
    },
    /// Solve for the sigma_alpha that makes each alternative as far as the benchmark's dogmatic AD.
    Equiv {
        #[command(flatten)]
        data: DataArgs,
        /// Benchmark model name.
        #[arg(long)]
        benchmark: String,
        /// Alternative model names; defaults to every other model.
        #[arg(long = "alt")]
        alternatives: Vec<String>,
        /// Upper end of the sigma_alpha search bracket, percent per year.
        #[arg(long, default_value_t = assetdist::equiv::DEFAULT_BRACKET_HI)]
        bracket_hi: f64,
    },
    /// Write a synthetic dataset (portfolios.csv, factors.csv, models.txt).
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Portfolio returns CSV; repeat to concatenate cross sections.
    #[arg(long = "portfolios", required = true)]
    portfolios: Vec<PathBuf>,
    /// Factor returns CSV (must contain the risk-free column).
    #[arg(long)]
    factors: PathBuf,
    /// Model definitions, one `NAME = F1,F2,...` per line.
    #[arg(long)]
    models: PathBuf,
    /// Risk-free column in the factor file.
    #[arg(long = "rf", default_value = "RF")]
    riskfree: String,
    /// Values treated as missing.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-99.99,-999")]
    missing: Vec<f64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads for per-model evaluation.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Recorded in output metadata.
    #[arg(long)]
    seed: Option<u64>,
}

impl DataArgs {
    fn into_config(self, sigma_grid: Vec<f64>) -> RunConfig {
        RunConfig {
            portfolio_paths: self.portfolios,
            factor_path: self.factors,
            model_path: self.models,
            riskfree_name: self.riskfree,
            missing_codes: self.missing,
            sigma_grid,
            output_dir: self.out,
            seed: self.seed,
            jobs: self.jobs,
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Rank(data) => commands::cmd_rank(&data.into_config(vec![0.0])),
        Command::Sweep { data, grid } => commands::cmd_sweep(&data.into_config(grid)),
        Command::Equiv {
            data,
            benchmark,
            alternatives,
            bracket_hi,
        } => commands::cmd_equiv(&data.into_config(vec![0.0]), &benchmark, &alternatives, bracket_hi),
        Command::Synth(args) => commands::cmd_synth(&args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Usage errors are user errors (1); --help and --version succeed.
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("assetdist: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
