use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::Context;
use clap::{Parser, Subcommand};
use shrinktarget::output::emit_outputs;
use shrinktarget::parallel::hardware_threads;
use shrinktarget::report::RunMeta;
use shrinktarget::{parse_config, run_experiment};

#[derive(Parser)]
#[command(name = "shrinktarget", about = "Shrinking-target experiments on expanding maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its report and data files.
    Run {
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Worker threads (default: hardware count); results do not depend on it.
        #[arg(long)]
        threads: Option<usize>,
        /// Overrides run.seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check a config and print it with defaults filled in.
    Validate { config: PathBuf },
    Version,
}

fn load(path: &PathBuf) -> anyhow::Result<shrinktarget::ExperimentConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_config(&text).with_context(|| format!("in {}", path.display()))
}

fn short(x: f64) -> String {
    if x != 0.0 && x.abs() < 1e-3 {
        format!("{x:.3e}")
    } else {
        format!("{x:.6}")
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> anyhow::Result<bool> {
    match Cli::parse().command {
        Command::Version => {
            println!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"));
            Ok(true)
        }
        Command::Validate { config } => {
            print!("{}", load(&config)?.to_toml());
            Ok(true)
        }
        Command::Run { config, output_dir, threads, seed } => {
            let mut cfg = load(&config)?;
            if let Some(s) = seed {
                cfg.run.seed = s;
            }
            let dir = output_dir.unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
            let threads = threads.unwrap_or_else(hardware_threads);
            let start = Instant::now();
            let outcome = run_experiment(&cfg, threads)?;
            let meta = RunMeta {
                version: env!("CARGO_PKG_VERSION"),
                timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
                wall_seconds: start.elapsed().as_secs_f64(),
                threads,
                output_dir: dir.display().to_string(),
            };
            emit_outputs(&dir, &cfg, &outcome.report, outcome.ensemble.as_ref(), &meta)?;
            for v in &outcome.report.verdicts {
                println!("{} [{}] {}: {} ({})", if v.pass { "PASS" } else { "FAIL" }, v.mode, v.check, short(v.value), v.tolerance);
            }
            println!("report written to {}", dir.join("report.json").display());
            Ok(outcome.report.passed)
        }
    }
}
