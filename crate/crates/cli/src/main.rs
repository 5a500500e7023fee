use std::path::PathBuf;
use std::process::ExitCode;

use bures_cli::{parse_grid, run_oracle_scan, run_reconstruct, run_sweep, ExperimentConfig, Preset, RunOptions};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bures", about = "Variational Bures resource experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Base seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cut epochs and restarts by 10x.
    #[arg(long, global = true)]
    fast: bool,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Train every grid point of an experiment and write a CSV.
    Sweep { config: PathBuf },
    /// Negativity, concurrence and analytic references along a grid.
    Oracle {
        preset: String,
        /// Inclusive grid `a:b:step`.
        #[arg(long, default_value = "0:1:0.1")]
        grid: String,
    },
    /// Train at one noise value and dump the closest separable state.
    Reconstruct {
        config: PathBuf,
        #[arg(long)]
        p: f64,
    },
}

fn run(cli: Cli) -> bures_cli::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| bures_cli::CliError::Config(format!("thread pool: {e}")))?;
    }
    let opts = RunOptions { seed: cli.seed, fast: cli.fast, out_dir: cli.out };
    match cli.command {
        Command::Sweep { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let out = run_sweep(&cfg, &opts)?;
            println!("wrote {}", out.csv.display());
            if let Some(trace) = out.trace {
                println!("wrote {}", trace.display());
            }
        }
        Command::Oracle { preset, grid } => {
            let preset: Preset = preset.parse()?;
            let path = run_oracle_scan(preset, &parse_grid(&grid)?, &opts)?;
            println!("wrote {}", path.display());
        }
        Command::Reconstruct { config, p } => {
            let cfg = ExperimentConfig::load(&config)?;
            let summary = run_reconstruct(&cfg, p, &opts)?;
            println!(
                "p={} R/2={:.6} F(rho, sigma)={:.6} terms={}",
                summary.p, summary.best_r_half, summary.fidelity, summary.cardinality
            );
            println!("wrote {}", summary.ensemble.display());
            println!("wrote {}", summary.sigma.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
