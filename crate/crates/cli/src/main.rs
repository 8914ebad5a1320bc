//! `seleq`: batch front end for verifying and falsifying equilibria of
//! selection-procedure competition.
//!
//! Exit codes: 0 when the certificate confirms, 1 when it falsifies, 2 on
//! input errors.

mod commands;
mod config;
mod instance;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Failure;

#[derive(Parser)]
#[command(name = "seleq", version, about = "Equilibria of competing selection procedures")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Dotted-path override, e.g. `--set capacity.k=0.1`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Output directory for emitted CSV files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed for prior sampling in the order oracles.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for parallel scans.
    #[arg(long, global = true, env = "SELEQ_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Compare two tests in accuracy and difficulty.
    Orders {
        /// Also run the posterior-dominance and quantile-crossing oracles.
        #[arg(long)]
        certify: bool,
    },
    /// Check a symmetric candidate against the deviation lattice.
    Verify,
    /// Select the candidate test and verify it.
    Solve,
    /// Sweep the family lattice and write the region CSV.
    Scan,
    /// Information cost of a test, its isocost counterpart, or a budget check.
    Cost {
        #[arg(long, value_name = "mu=V")]
        isocost: Option<String>,
        #[arg(long, value_name = "kappa=V")]
        verify: Option<String>,
    },
    /// Symmetric equilibrium under hiring capacity.
    Capacity,
    /// Asymmetric selective/safe configuration.
    TwoTier,
    /// Symmetric equilibrium with wage competition.
    Wage,
}

fn run(cli: Cli) -> Result<commands::Outcome, Failure> {
    let path = cli.config.ok_or_else(|| {
        Failure::Input(config::ConfigError {
            origin: "--config".into(),
            line: None,
            message: "a config file is required".into(),
        })
    })?;
    let mut overrides = cli.set;
    if let Some(seed) = cli.seed {
        overrides.push(format!("seed={seed}"));
    }
    if let Some(out) = &cli.out {
        overrides.push(format!("output.dir={:?}", out.display().to_string()));
    }
    let loaded = config::load(&path, &overrides)?;
    if let Some(n) = cli.threads.filter(|&n| n > 0) {
        seleq_core::par::init_threads(n);
    }
    let inst = instance::build(&loaded)?;
    match cli.command {
        Command::Orders { certify } => commands::orders(&loaded, &inst, certify),
        Command::Verify => commands::verify(&loaded, &inst),
        Command::Solve => commands::solve(&loaded, &inst),
        Command::Scan => commands::scan(&loaded, &inst),
        Command::Cost { isocost, verify } => {
            let mu = isocost.map(|s| commands::keyed_value("isocost", "mu", &s)).transpose()?;
            let kappa = verify.map(|s| commands::keyed_value("verify", "kappa", &s)).transpose()?;
            commands::cost(&loaded, &inst, mu, kappa)
        }
        Command::Capacity => commands::capacity(&loaded, &inst),
        Command::TwoTier => commands::two_tier(&loaded, &inst),
        Command::Wage => commands::wage(&loaded, &inst),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(o) => {
            print!("{}", o.block.as_str());
            ExitCode::from(if o.confirmed { 0 } else { 1 })
        }
        Err(Failure::Input(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
