//! `cycle-mld`: batch front end for the cycle ML-degree toolkit.
//!
//! Results go to stdout (or `--output`) as JSON or CSV; human-readable
//! tables go to stderr. Exit status: 0 when every check passes, 1 when a
//! mathematical check fails, 2 on usage or I/O errors.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "cycle-mld", version, about = "ML-degree census and checks for Gaussian cycle models")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Common {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    pub format: Format,

    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub threads: Option<usize>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FormulationArg {
    Concentration,
    Covariance,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(tag = "subcommand", rename_all = "lowercase")]
pub enum Command {
    /// ML-degree (n-3) 2^(n-2) + 1.
    Formula {
        #[arg(long)]
        n: usize,
    },
    /// Degree of the inverse variety.
    Degree {
        #[arg(long)]
        n: usize,
    },
    /// Census of the intersection at S = Id.
    Enumerate {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Transversality certificates for the full census.
    Certify {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Polynomial and ideal identity sweeps.
    Identities {
        #[arg(long, default_value_t = 20)]
        max_n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Maximum likelihood estimate.
    Mle {
        /// Data matrix as SymMatrix JSON.
        #[arg(long = "s", conflicts_with = "n")]
        s_file: Option<PathBuf>,
        /// Draw random positive definite data of this size instead.
        #[arg(long, required_unless_present = "s_file")]
        n: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 100)]
        max_iter: usize,
    },
    /// Multi-start count of complex critical points.
    Oracle {
        #[arg(long)]
        n: usize,
        /// Starting points (default 500 / 1000 / 4000 for n = 4 / 5 / 6).
        #[arg(long)]
        starts: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Data matrix as SymMatrix JSON (default: generic S from the seed).
        #[arg(long = "s")]
        s_file: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = FormulationArg::Concentration)]
        formulation: FormulationArg,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Every check, with a pass/fail table.
    All {
        /// Inclusive census range `A..B`.
        #[arg(long, default_value = "4..12")]
        n_range: String,
        /// Largest n whose census is also certified.
        #[arg(long, default_value_t = 8)]
        certify_max: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(t) = cli.common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(&cli.command, &cli.common) {
        Ok(outcome) => {
            if let Err(e) = output::emit(&cli.command, &cli.common, &outcome) {
                eprintln!("error: {e:#}");
                return ExitCode::from(2);
            }
            ExitCode::from(if outcome.pass { 0 } else { 1 })
        }
        Err(commands::Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(commands::Failure::Math(e)) => {
            eprintln!("check failed: {e:#}");
            ExitCode::from(1)
        }
    }
}
