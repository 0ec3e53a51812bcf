use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dyngrasp::harness::{run_scenario, run_sweep, mean_rate};
use dyngrasp::ScenarioConfig;

#[derive(Parser)]
#[command(name = "dyngrasp", about = "Dynamic grasping simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single scenario and write its telemetry CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Advance perception and control strictly alternately at the
        /// control rate (deterministic replay).
        #[arg(long)]
        lockstep: bool,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Also dump the per-tick model point clouds.
        #[arg(long)]
        dump_clouds: bool,
        /// Telemetry output path.
        #[arg(long, default_value = "telemetry.csv")]
        out: PathBuf,
    },
    /// Run a speed sweep and write summary CSV + rate table.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated conveyor speeds in m/s.
        #[arg(long, value_delimiter = ',', required = true)]
        speeds: Vec<f64>,
        /// Repetitions per speed.
        #[arg(long)]
        reps: usize,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        lockstep: bool,
    },
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run() -> Result<(), Box<dyn std::error::Error>> {
    match Cli::parse().command {
        Command::Run { config, lockstep, seed, dump_clouds, out } => {
            let mut cfg = ScenarioConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let dump_path = out.with_extension("clouds.txt");
            let summary = run_scenario(
                &cfg,
                lockstep,
                &out,
                dump_clouds.then_some(dump_path.as_path()),
            )?;
            println!(
                "outcome {} time_to_execute {} loss_duration {:.3} final_lin_err {:.6}",
                summary.outcome.as_str(),
                summary
                    .time_to_execute
                    .map(|t| format!("{t:.3}"))
                    .unwrap_or_else(|| "-".into()),
                summary.loss_duration,
                summary.final_lin_err,
            );
            println!("telemetry written to {}", out.display());
        }
        Command::Sweep { config, speeds, reps, out, lockstep } => {
            if speeds.iter().any(|s| *s < 0.0) {
                return Err("speeds must be non-negative".into());
            }
            let cfg = ScenarioConfig::load(&config)?;
            let result = run_sweep(&cfg, &speeds, reps, lockstep, &out)?;
            for (speed, rate) in &result.rates {
                println!("speed {speed:.3} m/s success rate {rate:.3}");
            }
            if let Some(mean) = mean_rate(&result) {
                println!("mean success rate {mean:.3} over {} runs", result.rows.len());
            }
            println!("artifacts written to {}", out.display());
        }
    }
    Ok(())
}
