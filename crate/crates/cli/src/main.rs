use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

use bridgeopt::Error;

#[derive(Parser, Debug)]
#[command(name = "bridgeopt", version, about = "Cable-stayed footbridge design optimisation")]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a seeded multi-run experiment and write its artifacts.
    Run(RunArgs),
    /// Check a run configuration without running it.
    ValidateConfig(ConfigArgs),
    /// Compare two experiment directories.
    Compare {
        dir_a: PathBuf,
        dir_b: PathBuf,
        /// Also write the comparison as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Descriptive statistics and tests on the final values of run sets.
    Stats {
        #[arg(required = true, num_args = 1..=2)]
        dirs: Vec<PathBuf>,
    },
    /// Draw or list the geometry of one or more genomes.
    ExportGeometry(ExportArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct ConfigArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = ["ga", "cmaes", "cma-es"])]
    algo: Option<String>,
    #[arg(long)]
    runs: Option<usize>,
    /// Base seed; run i uses seed * 1000 + i.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    generations: Option<u64>,
    #[arg(long)]
    pop_size: Option<usize>,
    #[arg(long)]
    mu: Option<usize>,
    #[arg(long)]
    lambda: Option<usize>,
    #[arg(long)]
    sigma0: Option<f64>,
    /// Write a CMA-ES snapshot every N generations.
    #[arg(long)]
    snapshot_every: Option<u64>,
    /// Leave the first N generations out of the convergence plot data.
    #[arg(long)]
    skip_first: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Reference cost c_r of the fitness, kEUR.
    #[arg(long)]
    cr: Option<f64>,
    #[arg(long)]
    domains: Option<PathBuf>,
    #[arg(long)]
    materials: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Continue CMA-ES runs from the snapshots in the output directory.
    #[arg(long)]
    resume: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Svg,
    Csv,
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    /// Genome files: a JSON array of genes or an object with a `genes` field.
    genomes: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "svg")]
    format: Format,
    #[arg(long)]
    out: PathBuf,
    /// Draw the built-in reference design first.
    #[arg(long)]
    reference: bool,
    #[arg(long)]
    domains: Option<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => 3,
        Error::IncompleteData { .. } => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Run(args) => commands::run(&args),
        Command::ValidateConfig(args) => commands::validate_config(&args),
        Command::Compare { dir_a, dir_b, json } => commands::compare(&dir_a, &dir_b, json.as_deref()),
        Command::Stats { dirs } => commands::stats(&dirs),
        Command::ExportGeometry(args) => commands::export_geometry(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
