use std::path::PathBuf;
use std::process::ExitCode;

use catqcf_cli::{resolve, run, Mode};
use clap::Parser;

/// Quantum-classical fidelity experiments for the perturbed cat map.
#[derive(Parser)]
#[command(name = "catqcf", version)]
struct Cli {
    mode: Mode,
    /// JSON configuration; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set dim_N=256`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all CPUs).
    #[arg(long)]
    threads: Option<usize>,
    /// Leave timestamp and runtime out of output files.
    #[arg(long)]
    no_timestamp: bool,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let text = match &cli.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", path.display());
                return ExitCode::from(EXIT_CONFIG);
            }
        },
        None => String::new(),
    };
    let mut config = match resolve(&text, &cli.overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    config.mode = cli.mode;
    if let Some(out) = cli.out {
        config.output_dir = out;
    }
    if let Some(n) = cli.threads {
        config.threads = n;
    }
    if config.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build_global()
        {
            eprintln!("error: thread pool: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(&config, !cli.no_timestamp) {
        Ok(lines) => {
            for line in lines {
                println!("{line}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                ExitCode::from(EXIT_NUMERICAL)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
