use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use eitcool::config::{load_config, RunConfig};
use eitcool::runner;

/// Simulate laser cooling of trapped atoms and ions: dark-resonance
/// spectra, cooling-rate dynamics, quantum-jump trajectories, ion-string
/// normal modes, and sideband thermometry.
#[derive(Parser, Debug)]
#[command(name = "eitcool", version, about)]
struct Cli {
    /// Scenario configuration file (TOML).
    config: PathBuf,
    /// Output directory (overrides the config's `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed (overrides the config's `seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Size of the worker thread pool (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Treat warnings as errors (after writing all outputs).
    #[arg(long)]
    strict: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: could not size the thread pool: {e}");
            return ExitCode::from(2);
        }
    }

    let raw = match std::fs::read(&cli.config) {
        Ok(bytes) => bytes,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", cli.config.display());
            return ExitCode::from(2);
        }
    };
    let mut config: RunConfig = match load_config(&cli.config) {
        Ok(config) => config,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_category().code() as u8);
        }
    };
    if let Some(out) = &cli.out {
        config.output_dir = out.display().to_string();
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }

    match runner::run(&config, &raw) {
        Ok(outcome) => {
            for file in &outcome.files {
                println!("[eitcool] wrote {}", file.display());
            }
            for warning in &outcome.warnings {
                eprintln!("warning: {warning}");
            }
            if cli.strict && !outcome.warnings.is_empty() {
                eprintln!("error: {} warnings with --strict", outcome.warnings.len());
                return ExitCode::from(3);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_category().code() as u8)
        }
    }
}
