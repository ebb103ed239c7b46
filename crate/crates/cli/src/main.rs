//! `edgecache` command-line driver: generate traces, analyze them, simulate
//! caching strategies and sweep parameter grids.

mod analyze;
mod files;
mod gen;
mod run;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub use files::{input_error, usage_error, Exit};

#[derive(Debug, Parser)]
#[command(name = "edgecache", version, about = "Trace-driven edge caching laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic trace, its infrastructure and a video catalog.
    Gen(gen::GenArgs),
    /// Compute measurement reports over a trace.
    Analyze(analyze::AnalyzeArgs),
    /// Simulate one caching strategy.
    Sim(run::SimArgs),
    /// Simulate a grid of strategies, node kinds and capacities.
    Sweep(run::SweepArgs),
}

/// Inputs shared by the simulation commands.
#[derive(Debug, Clone, Args)]
pub struct SimInputs {
    /// Trace CSV (`user_id,timestamp,lat,lon,video_id`).
    #[arg(long)]
    pub trace: std::path::PathBuf,
    /// Infrastructure CSV (`id,kind,lat,lon,poi`).
    #[arg(long)]
    pub infra: std::path::PathBuf,
    /// Simulation config file (TOML, or JSON by extension).
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
    /// Video catalog CSV with a per-video `decay` column for plan-driven caches.
    #[arg(long)]
    pub categories: Option<std::path::PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: std::path::PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let detail = e.to_string();
            let line = detail.lines().next().unwrap_or_default().trim_start_matches("error: ");
            eprintln!("error[usage]: {line}");
            return ExitCode::from(1);
        }
    };
    let argv: Vec<String> = std::env::args().collect();
    let result = match cli.command {
        Command::Gen(a) => gen::run(a, &argv),
        Command::Analyze(a) => analyze::run(a, &argv),
        Command::Sim(a) => run::sim(a, &argv),
        Command::Sweep(a) => run::sweep(a, &argv),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (code, class) = match e.downcast_ref::<Exit>() {
                Some(x) => (x.code, x.class()),
                None => (3, "internal"),
            };
            let msg = format!("{e:#}").replace(['\n', '\r'], " ");
            eprintln!("error[{class}]: {msg}");
            ExitCode::from(code)
        }
    }
}
