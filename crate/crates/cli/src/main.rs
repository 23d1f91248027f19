//! `orthospin`: batch sweeps and verification runs.
//!
//! Exit codes: 0 all gating checks pass, 1 usage or input error,
//! 2 capacity violation (partial results are still written),
//! 3 a gating check failed.

mod config;
mod table;
mod verify;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use orthospin_core::report::{fits_to_json, write_csv};

const EXIT_USAGE: u8 = 1;
const EXIT_CAPACITY: u8 = 2;
const EXIT_INVARIANT: u8 = 3;

#[derive(Parser)]
#[command(
    name = "orthospin",
    version,
    about = "Exact and Monte Carlo sweeps for Curie-Weiss and orthogonal spin models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep and check every requested quantity.
    Verify {
        /// Sweep specification file.
        #[arg(long)]
        spec: PathBuf,
        /// Directory receiving results.csv, fits.json and summary.txt.
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (0 = one per core).
        #[arg(long, default_value_t = 0)]
        threads: usize,
        #[arg(long)]
        verbose: bool,
    },
    /// Print results.csv as a table and write `<quantity>_vs_n.dat` files.
    Table {
        /// Directory holding results.csv; the .dat files are written here.
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match cli.command {
        Command::Verify {
            spec,
            out,
            threads,
            verbose,
        } => cmd_verify(&spec, &out, threads, verbose),
        Command::Table { out } => match table::run(&out) {
            Ok((text, files)) => {
                print!("{text}");
                for f in files {
                    println!("wrote {}", f.display());
                }
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_USAGE)
            }
        },
    }
}

fn cmd_verify(spec_path: &Path, out: &Path, threads: usize, verbose: bool) -> ExitCode {
    let text = match fs::read_to_string(spec_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", spec_path.display());
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let spec = match config::parse(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {}: {e}", spec_path.display());
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start {threads} worker threads: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let outcome = match pool.install(|| verify::run(&spec, verbose)) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    for msg in &outcome.capacity {
        eprintln!("capacity: {msg}");
    }
    let summary = verify::summary(&spec, &outcome);
    if let Err(e) = write_outputs(out, &outcome, &summary) {
        eprintln!("error: writing results to {}: {e}", out.display());
        return ExitCode::from(EXIT_USAGE);
    }
    print!("{summary}");
    if !outcome.capacity.is_empty() {
        ExitCode::from(EXIT_CAPACITY)
    } else if outcome.failed_checks() > 0 {
        ExitCode::from(EXIT_INVARIANT)
    } else {
        ExitCode::SUCCESS
    }
}

fn write_outputs(
    out: &Path,
    outcome: &verify::Outcome,
    summary: &str,
) -> orthospin_core::Result<()> {
    fs::create_dir_all(out)?;
    let mut csv = Vec::new();
    write_csv(&outcome.rows, &mut csv)?;
    fs::write(out.join("results.csv"), csv)?;
    fs::write(out.join("fits.json"), fits_to_json(&outcome.fits)? + "\n")?;
    fs::write(out.join("summary.txt"), summary)?;
    Ok(())
}
