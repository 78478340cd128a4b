//! `bandlab`: command-line driver for band-matrix fluctuation experiments.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

const AFTER_HELP: &str = "\
Output formats:
  report.txt   one record per line, `kind key=value ...`; floats carry 17
               significant digits. Kinds: report, config, phi, charfn.
  samples.csv  replica,seed,phi,value  (fluctuations sqrt(b/n) (N - mean N))
  spectra.csv  replica,lambda
  sweep.csv    n,b,phi,var_emp,var_theory,rel_gap,stderr

Exit codes: 0 success, 2 configuration error, 3 runtime error,
4 oracle failure.

The default worker count comes from BANDLAB_WORKERS, else the number of
available cores; montecarlo.worker_count in a config file overrides both.";

#[derive(Parser)]
#[command(name = "bandlab", version, about, after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a replicated experiment and write its report.
    Simulate { config: PathBuf },
    /// Print the limiting variance and, optionally, covariances and the
    /// finite-n identity.
    Theory {
        #[arg(long, default_value = "box")]
        profile: String,
        /// Fourth cumulant of the entries.
        #[arg(long, allow_hyphen_values = true, conflicts_with = "distribution")]
        kappa4: Option<f64>,
        /// Take the fourth cumulant from an entry law instead.
        #[arg(long)]
        distribution: Option<String>,
        #[arg(long, default_value = "poly:0,0,1")]
        phi: String,
        /// Also print the Sobolev norm of the given index.
        #[arg(long)]
        sobolev: Option<f64>,
        /// Resolvent covariance at z1 z2, each written `re,im`.
        #[arg(long, num_args = 2, value_names = ["Z1", "Z2"], allow_hyphen_values = true)]
        covariance: Option<Vec<String>>,
        /// Finite-n identity at n b zeta; zeta is `re` or `re,im`.
        #[arg(long, num_args = 3, value_names = ["N", "B", "ZETA"], allow_hyphen_values = true)]
        finite_n: Option<Vec<String>>,
    },
    /// Repeat an experiment over a grid of (n, b) and write sweep.csv.
    Sweep {
        config: PathBuf,
        /// Comma-separated `n:b` points; defaults to the config's own point.
        #[arg(long)]
        grid: Option<String>,
    },
    /// Run the oracle self-checks.
    Check,
    /// Print the eigenvalues of one seeded matrix, one per line.
    Spectrum {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        b: f64,
        #[arg(long, default_value = "box")]
        profile: String,
        #[arg(long, default_value = "gaussian")]
        distribution: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write to this file instead of standard output.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config } => commands::simulate(&config),
        Command::Theory {
            profile,
            kappa4,
            distribution,
            phi,
            sobolev,
            covariance,
            finite_n,
        } => commands::theory(&commands::TheoryArgs {
            profile,
            kappa4,
            distribution,
            phi,
            sobolev,
            covariance,
            finite_n,
        }),
        Command::Sweep { config, grid } => commands::sweep(&config, grid.as_deref()),
        Command::Check => commands::check(),
        Command::Spectrum {
            n,
            b,
            profile,
            distribution,
            seed,
            output,
        } => commands::spectrum(n, b, &profile, &distribution, seed, output.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("bandlab: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
