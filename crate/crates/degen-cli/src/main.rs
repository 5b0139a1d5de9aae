//! `degenctl`: configuration-driven experiment runner for the
//! degenerate-diffusion control workbench. Every subcommand reads a TOML
//! configuration and writes deterministic CSV artifacts.

mod commands;
mod config;
mod csv;

use clap::{Parser, Subcommand};
use degen_core::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "degenctl",
    about = "Spectral analysis, Kalman tests and boundary-control synthesis \
             for 1-d/2-d degenerate diffusion systems",
    version
)]
struct Cli {
    /// Output directory for CSV artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads for parallelizable stages (0 = library default).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Seed override for randomly generated test states.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues, zeros, observation traces, and the mesh-oracle check.
    Spectrum {
        #[arg(long)]
        config: PathBuf,
    },
    /// Two-sided eigenvalue gap bounds.
    Gap {
        #[arg(long)]
        config: PathBuf,
    },
    /// Kalman/Hautus controllability table.
    Kalman {
        #[arg(long)]
        config: PathBuf,
    },
    /// 1-d null-control synthesis with diagnostics.
    Control1d {
        #[arg(long)]
        config: PathBuf,
    },
    /// Control norms across a list of horizons.
    Costcurve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Restriction-Gram spectral-inequality fit.
    Spectralineq {
        #[arg(long)]
        config: PathBuf,
    },
    /// Full 2-d time-splitting boundary-control run.
    Control2d {
        #[arg(long)]
        config: PathBuf,
    },
}

fn run(cli: &Cli) -> Result<(), Error> {
    if cli.threads > 0 {
        // ignore failure: the pool may already exist in tests
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    std::fs::create_dir_all(&cli.out)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", cli.out.display())))?;
    match &cli.command {
        Command::Spectrum { config } => {
            let cfg: config::SpectrumConfig = config::load(config)?;
            commands::cmd_spectrum(&cfg, &cli.out)
        }
        Command::Gap { config } => {
            let cfg: config::GapConfig = config::load(config)?;
            commands::cmd_gap(&cfg, &cli.out)
        }
        Command::Kalman { config } => {
            let cfg: config::KalmanConfig = config::load(config)?;
            commands::cmd_kalman(&cfg, &cli.out)
        }
        Command::Control1d { config } => {
            let cfg: config::Control1dConfig = config::load(config)?;
            commands::cmd_control1d(&cfg, &cli.out, cli.seed)
        }
        Command::Costcurve { config } => {
            let cfg: config::CostCurveConfig = config::load(config)?;
            commands::cmd_costcurve(&cfg, &cli.out, cli.seed)
        }
        Command::Spectralineq { config } => {
            let cfg: config::SpectralIneqConfig = config::load(config)?;
            commands::cmd_spectralineq(&cfg, &cli.out)
        }
        Command::Control2d { config } => {
            let cfg: config::Control2dConfig = config::load(config)?;
            commands::cmd_control2d(&cfg, &cli.out, cli.seed)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Domain(_) => ExitCode::from(2),
                Error::Conditioning { .. } | Error::Controllability(_) | Error::Numerical(_) => {
                    ExitCode::from(3)
                }
            }
        }
    }
}
