//! `sfsep`: filter tables, reference scenarios and latency measurements for
//! the spherical sound field separator.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sfsep_core::Error;

#[derive(Parser)]
#[command(name = "sfsep", version, about = "Time-domain sound field separation on a sphere")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed of every random stream.
    #[arg(long)]
    seed: Option<u64>,
    /// Independent realizations to pool.
    #[arg(long)]
    runs: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Exit with status 3 when a threshold check fails.
    #[arg(long)]
    check: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Write the FIR tap tables and compare them with the DFT oracle.
    GenFilters(Common),
    /// Run a scenario.
    Run {
        scenario: Scenario,
        #[command(flatten)]
        common: Common,
    },
    /// Order and frequency sweep (same as `run sweep`).
    Sweep(Common),
    /// Per-sample step latency.
    Bench(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Scenario {
    /// Filter tables and oracle comparison (same as `gen-filters`).
    #[value(alias = "fig2")]
    Filters,
    Freefield,
    Room,
    Sweep,
    Custom,
}

fn is_config_error(e: &Error) -> bool {
    matches!(e, Error::Config(_) | Error::Order { .. } | Error::Geometry(_) | Error::Parse(_) | Error::Domain(_))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (which, common) = match cli.command {
        Command::GenFilters(c) => (Scenario::Filters, c),
        Command::Run { scenario, common } => (scenario, common),
        Command::Sweep(c) => (Scenario::Sweep, c),
        Command::Bench(c) => {
            return finish(run(None, &c), c.check);
        }
    };
    finish(run(Some(which), &common), common.check)
}

fn run(which: Option<Scenario>, c: &Common) -> Result<commands::Outcome, (u8, String)> {
    let mut cfg = config::load(c.config.as_deref()).map_err(|e| (2, e))?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(r) = c.runs {
        cfg.runs = r;
    }
    let result = match which {
        Some(Scenario::Filters) => commands::gen_filters(&cfg, &c.out),
        Some(Scenario::Freefield) => commands::freefield(&cfg, &c.out),
        Some(Scenario::Room) => commands::room(&cfg, &c.out),
        Some(Scenario::Sweep) => commands::sweep(&cfg, &c.out),
        Some(Scenario::Custom) => commands::custom(&cfg, &c.out),
        None => commands::bench(&cfg, &c.out),
    };
    result.map_err(|e| (if is_config_error(&e) { 2 } else { 1 }, e.to_string()))
}

fn finish(result: Result<commands::Outcome, (u8, String)>, check: bool) -> ExitCode {
    match result {
        Ok(outcome) => {
            if check && !outcome.passed() {
                for (line, ok) in &outcome.checks {
                    if !ok {
                        eprintln!("check failed: {line}");
                    }
                }
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
