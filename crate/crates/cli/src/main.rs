//! `ergoport` command-line driver.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 config error,
//! 3 non-convergence, 4 I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ergoport::commands::{self, Context};
use ergoport::config::ExperimentConfig;
use ergoport::error::CliError;

#[derive(Parser)]
#[command(name = "ergoport", version, about = "Risk-sensitive portfolio rebalancing under transaction costs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run value iteration; writes value.csv, policy.csv and report.json.
    Solve(Common),
    /// Monte Carlo metrics for the configured strategies.
    Evaluate(Common),
    /// One common return path for all strategies; writes path_<strategy>.csv.
    Simulate(Common),
    /// No-trade region of a solved policy; writes region.json.
    Region {
        #[command(flatten)]
        common: Common,
        /// No-trade threshold in l1 weight distance.
        #[arg(long)]
        eta: Option<f64>,
    },
    /// Mean-variance optimum of the one-period log-returns; writes markowitz.json.
    Markowitz(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed of the evaluation and simulation paths.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (results do not depend on it).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    fixed_iters: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// Policy file to use instead of <out>/policy.csv.
    #[arg(long)]
    policy: Option<PathBuf>,
}

impl Common {
    fn context(&self) -> Result<Context, CliError> {
        if let Some(n) = self.threads {
            if n == 0 {
                return Err(CliError::Config("--threads must be at least 1".into()));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::Compute(e.to_string()))?;
        }
        let mut config = ExperimentConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            config.evaluation.seed = seed;
            config.simulate.seed = seed;
        }
        if let Some(n) = self.fixed_iters {
            config.solver.fixed_iters = Some(n);
        }
        if let Some(tol) = self.tol {
            if !(tol > 0.0) {
                return Err(CliError::Config("--tol must be positive".into()));
            }
            config.solver.tol = tol;
            config.solver.fixed_iters = None;
        }
        std::fs::create_dir_all(&self.out).map_err(|e| CliError::Io(format!("{}: {e}", self.out.display())))?;
        Ok(Context { config, out: self.out.clone(), policy: self.policy.clone() })
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve(c) => commands::solve(&c.context()?),
        Command::Evaluate(c) => commands::evaluate(&c.context()?),
        Command::Simulate(c) => commands::simulate(&c.context()?),
        Command::Region { common, eta } => commands::region(&common.context()?, eta),
        Command::Markowitz(c) => commands::markowitz(&c.context()?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ergoport: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
