use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sqpt_cli::config::RunConfig;
use sqpt_cli::io::{read_json, to_pretty_json, write_atomic, ChoiResultFile};
use sqpt_cli::report::{compare_choi, TolerancePolicy};
use sqpt_cli::{tasks, CliError};

/// Squeezed-probe tomography of quantum processes and detectors:
/// simulate homodyne runs, reconstruct process matrices and POVMs, and
/// compare estimates against exact oracles.
#[derive(Parser)]
#[command(name = "sqpt", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the task described by a TOML config file.
    Run {
        /// Path to the run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Override the worker-thread count (results are identical for any
        /// value).
        #[arg(long)]
        workers: Option<usize>,
        /// Override the RNG seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Directory against which relative paths in [paths] are resolved.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare an estimate file against an oracle file element by element.
    Compare {
        #[arg(long)]
        estimate: PathBuf,
        #[arg(long)]
        oracle: PathBuf,
        /// Tolerance multiplier on per-element standard errors.
        #[arg(long, default_value_t = 4.0)]
        c: f64,
        /// Absolute tolerance floor.
        #[arg(long, default_value_t = 0.03)]
        abs_floor: f64,
        /// Where to write the JSON report (stdout summary otherwise).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match run() {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run() -> Result<String, CliError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            workers,
            seed,
            out,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(w) = workers {
                cfg.workers = Some(w);
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            tasks::run(&cfg, out.as_deref())
        }
        Command::Compare {
            estimate,
            oracle,
            c,
            abs_floor,
            out,
        } => {
            let est: ChoiResultFile = read_json(&estimate)?;
            let ora: ChoiResultFile = read_json(&oracle)?;
            let report = compare_choi(&est, &ora, TolerancePolicy { c, abs_floor })?;
            let summary = format!(
                "{}: {} elements, {} failing, max error {:.6e}",
                if report.pass { "PASS" } else { "FAIL" },
                report.n_elements,
                report.n_fail,
                report.max_error
            );
            if let Some(path) = out {
                write_atomic(&path, &to_pretty_json(&report))?;
            }
            if report.pass {
                Ok(summary)
            } else {
                Err(CliError::Numerical(summary))
            }
        }
    }
}
