mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Thin-layer spectral studies: geometry reports, spectra and ε-sweeps.
#[derive(Parser, Debug)]
#[command(name = "thinlayer", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "./out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for every randomized step [default: 42].
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    verbose: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Curvature, effective potential and effective field per node.
    Geometry,
    /// Lowest eigenvalues of the requested operators at one ε.
    Spectrum,
    /// ε-sweep of eigenvalue, eigenfunction and resolvent convergence.
    Converge,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Some(config) = cli.config.clone() else {
        eprintln!("error: --config <path> is required");
        return ExitCode::from(commands::EXIT_CONFIG);
    };
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global() {
            eprintln!("warning: could not configure thread pool: {e}");
        }
    }
    let opts = commands::Options { config, out: cli.out, seed: cli.seed, verbose: cli.verbose };
    let result = match cli.command {
        Command::Geometry => commands::geometry(&opts),
        Command::Spectrum => commands::spectrum(&opts),
        Command::Converge => commands::converge(&opts),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
