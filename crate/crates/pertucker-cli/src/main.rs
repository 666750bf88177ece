//! Batch front door for personalized Tucker decomposition: dataset
//! simulation, fitting, the three application heads, and the benchmark
//! studies. Every invocation writes a run manifest next to its outputs and
//! is byte-reproducible from (inputs, config, seed).

mod commands;
mod configs;
mod manifest;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pertucker::Error;

#[derive(Parser)]
#[command(
    name = "pertucker",
    version,
    about = "Personalized Tucker decomposition toolkit"
)]
struct Cli {
    /// Worker threads for benchmark repeats (fallback: PERTUCKER_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset (pattern images or a planted model).
    Simulate(commands::simulate::Args),
    /// Fit the personalized decomposition to PTEN sources.
    Fit(commands::fit::Args),
    /// Score samples against the per-source local subspaces of a model.
    Classify(commands::classify::Args),
    /// Monitor a sample stream with the local-core statistic.
    Monitor(commands::monitor::Args),
    /// Cluster the sources of a model by local-subspace distance.
    Cluster(commands::cluster::Args),
    /// Component-recovery comparison against the single-decomposition
    /// baselines, aggregated over seeded repeats.
    BenchTable1(commands::bench::Table1Args),
    /// Classification accuracy per training size over seeded repeats.
    BenchTable2(commands::bench::Table2Args),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(), // 0 for --help/--version, 2 for usage errors
    };

    let threads = cli.threads.or_else(|| {
        std::env::var("PERTUCKER_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {} threads: {}", n, e);
            return ExitCode::from(2);
        }
    }

    let result = match cli.command {
        Command::Simulate(args) => commands::simulate::run(args),
        Command::Fit(args) => commands::fit::run(args),
        Command::Classify(args) => commands::classify::run(args),
        Command::Monitor(args) => commands::monitor::run(args),
        Command::Cluster(args) => commands::cluster::run(args),
        Command::BenchTable1(args) => commands::bench::run_table1(args),
        Command::BenchTable2(args) => commands::bench::run_table2(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e);
            match e {
                // numeric failure (non-finite values encountered)
                Error::NonFinite(_) => ExitCode::from(3),
                // usage, config, format and IO problems
                _ => ExitCode::from(2),
            }
        }
    }
}
