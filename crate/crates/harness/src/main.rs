use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use sslm_core::estimator::{predict_current_state, CommandLog, VisionFrame};
use sslm_core::refparser::RefereeLog;
use sslm_core::Vec2;
use sslm_harness::bench::{run_bench, BenchConfig};
use sslm_harness::{run_with, RunOptions, Scenario};

#[derive(Parser)]
#[command(name = "sslm", version, about = "Motion planning stack simulator and tools")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate a scenario file and print (or write) its report.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write the per-tick trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Include wall-clock planner latency in the report.
        #[arg(long)]
        timing: bool,
    },
    /// Time the planner on random cluttered scenes.
    Bench {
        #[arg(long, default_value_t = 15)]
        obstacles: usize,
        #[arg(long, default_value_t = 10_000)]
        iters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the game-state leaf timeline of a referee log.
    ParseRef { log: PathBuf },
    /// Replay a command log from a vision pose and print the predicted state.
    Replay {
        log: PathBuf,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        x: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        y: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        heading: f64,
        /// Capture time of the pose; defaults to the first command.
        #[arg(long, allow_negative_numbers = true)]
        from: Option<f64>,
        /// Prediction time; defaults to the last command.
        #[arg(long, allow_negative_numbers = true)]
        to: Option<f64>,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Cmd::Run {
            scenario,
            seed,
            report,
            trace,
            timing,
        } => {
            let mut sc = Scenario::load(&scenario)?;
            sc.apply_overrides(|k| std::env::var(k).ok())?;
            let out = run_with(
                &sc,
                &RunOptions {
                    seed,
                    trace: trace.is_some(),
                    timing,
                },
            );
            let json = out.report.to_json();
            match report {
                Some(path) => fs::write(&path, json + "\n").with_context(|| format!("writing {}", path.display()))?,
                None => println!("{json}"),
            }
            if let Some(path) = trace {
                fs::write(&path, out.trace).with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Cmd::Bench { obstacles, iters, seed } => {
            let report = run_bench(&BenchConfig { obstacles, iters, seed });
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Cmd::ParseRef { log } => {
            let text = fs::read_to_string(&log).with_context(|| format!("reading {}", log.display()))?;
            let parsed: RefereeLog = text.parse()?;
            for (t, leaf) in parsed.leaf_timeline() {
                println!("{t:.3} {leaf}");
            }
        }
        Cmd::Replay {
            log,
            x,
            y,
            heading,
            from,
            to,
        } => {
            let text = fs::read_to_string(&log).with_context(|| format!("reading {}", log.display()))?;
            let commands: CommandLog = text.parse()?;
            let first = commands.iter().next().map_or(0.0, |e| e.t_sent);
            let last = commands.last().map_or(first, |e| e.t_sent);
            let frame = VisionFrame {
                t_capture: from.unwrap_or(first),
                position: Vec2::new(x, y),
                heading,
                velocity: None,
            };
            let state = predict_current_state(&frame, &commands, to.unwrap_or(last));
            println!("{}", serde_json::to_string_pretty(&state)?);
        }
    }
    Ok(())
}
