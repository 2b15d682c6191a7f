//! `robinlab run <config>`: runs one experiment and writes its report.
//!
//! Exit status 0 when every check passes, 1 when a check fails or the
//! computation breaks down, 2 when the configuration is rejected.

mod config;
mod report;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "robinlab", version, about = "Nonlocal Robin boundary condition laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config file.
    Run {
        config: PathBuf,
        /// Output directory; defaults to the config's `output` field, then `robinlab-out`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the config's `tolerance`.
        #[arg(long)]
        tol: Option<f64>,
        /// Worker threads for parallel sections (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
}

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn main() -> ExitCode {
    let Command::Run { config: path, out, tol, threads } = Cli::parse().command;

    let mut cfg = match config::load(&path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(t) = tol {
        cfg.tolerance = t;
        if let Err(e) = cfg.validate() {
            eprintln!("config error: --tol: {}", e.message);
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    if threads == Some(0) {
        eprintln!("config error: --threads must be at least 1");
        return ExitCode::from(EXIT_CONFIG);
    }
    let out = out.or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("robinlab-out"));

    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.unwrap_or(0)).build();
    let pool = match pool {
        Ok(p) => p,
        Err(e) => {
            eprintln!("cannot start worker threads: {e}");
            return ExitCode::from(EXIT_CHECK_FAILED);
        }
    };
    let report = match pool.install(|| run::run(&cfg)) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Err(e) = report.write(&out) {
        eprintln!("cannot write report to {}: {e}", out.display());
        return ExitCode::from(EXIT_CHECK_FAILED);
    }

    for c in &report.checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        println!("{status}  {}  worst {:.3e} (tol {:.1e})", c.name, c.worst_violation, c.tolerance);
    }
    if let Some(e) = &report.error {
        println!("ERROR {e}");
    }
    println!("report written to {}", out.join("report.json").display());
    if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CHECK_FAILED)
    }
}
