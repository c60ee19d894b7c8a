#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;

use commands::Failure;

/// Quantum work distributions for driven finite-dimensional systems.
#[derive(Parser, Debug)]
#[command(name = "workhist", version, about)]
struct Cli {
    /// Protocol configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Directory for output files.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,

    /// Worker threads for trajectory enumeration.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// Reject near-degenerate spectra instead of merging them.
    #[arg(long, global = true)]
    strict_degeneracy: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the selected distributions and write one CSV per distribution.
    Dist,
    /// Compare all four distributions and write the property report as JSON.
    Compare,
    /// Re-run over a list of K or beta values and write one CSV row per value.
    Sweep {
        #[arg(long, value_enum)]
        axis: Axis,
        /// Ascending, comma separated.
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        values: Vec<f64>,
    },
    /// Reproduce the driven-qubit cumulative distributions (frozen parameters).
    Fig2,
    /// Enumerated and closed-form moments up to a maximum order.
    Moments {
        #[arg(long, default_value_t = 4)]
        max_order: u32,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    #[value(name = "K", alias = "k")]
    K,
    #[value(name = "beta")]
    Beta,
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::usage(format!("cannot start worker pool: {e}")))?;
    }
    std::fs::create_dir_all(&cli.out)
        .map_err(|e| Failure::usage(format!("cannot create output directory {}: {e}", cli.out.display())))?;

    let config = || -> Result<&Path, Failure> {
        cli.config
            .as_deref()
            .ok_or_else(|| Failure::usage("this command needs --config PATH"))
    };
    let ctx = commands::Context {
        out: cli.out.clone(),
        strict_degeneracy: cli.strict_degeneracy,
    };
    match cli.command {
        Command::Dist => commands::dist(&ctx, &commands::load(config()?, &ctx)?),
        Command::Compare => commands::compare(&ctx, &commands::load(config()?, &ctx)?),
        Command::Sweep { axis, values } => commands::sweep(&ctx, &commands::load(config()?, &ctx)?, axis, &values),
        Command::Fig2 => commands::fig2(&ctx),
        Command::Moments { max_order } => commands::moments(&ctx, &commands::load(config()?, &ctx)?, max_order),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
