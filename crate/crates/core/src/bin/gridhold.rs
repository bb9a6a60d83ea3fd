use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gridhold::runner::{self, WORKERS_ENV};
use gridhold::Scenario;

#[derive(Parser)]
#[command(version, about = "Point-queue grid traffic simulator with CAV holding")]
struct Cli {
    /// Parallel runs; defaults to the available cores.
    #[arg(long, global = true, env = WORKERS_ENV)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of a scenario, or a single one with --seed.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a named parameter sweep.
    Sweep {
        #[arg(long)]
        preset: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a scenario file and print it with defaults filled in.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let workers = cli.workers.unwrap_or_else(runner::worker_count);
    let result = match cli.command {
        Command::Simulate { scenario, seed, out } => Scenario::load(&scenario).and_then(|mut s| {
            if let Some(seed) = seed {
                s.seeds = vec![seed];
            }
            let out = out.unwrap_or_else(|| s.out_dir.clone());
            let rows = runner::run_scenario(&s, Some(&out), workers)?;
            for r in rows {
                println!(
                    "{} seed {}: {} of {} trips done, total delay {:.0} s, {}",
                    r.label,
                    r.seed,
                    r.exited,
                    r.injected,
                    r.total_delay_s,
                    if r.stable { "stable" } else { "unstable" }
                );
            }
            Ok(())
        }),
        Command::Sweep { preset, out } => {
            let out = out.unwrap_or_else(runner::default_out);
            runner::run_preset(&preset, Some(&out), workers).map(|rows| {
                for r in rows {
                    println!(
                        "{} {}={}: delay {:.0} s ({:+.1}% vs baseline), exits {:.0}",
                        r.preset,
                        r.parameter,
                        r.value,
                        r.mean_total_delay_s,
                        r.delay_reduction_pct,
                        r.mean_exits
                    );
                }
            })
        }
        Command::Validate { scenario } => Scenario::load(&scenario).and_then(|s| {
            print!("{}", s.to_toml_string()?);
            Ok(())
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
