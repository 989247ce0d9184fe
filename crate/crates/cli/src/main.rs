//! `groundgap` command-line frontend.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on usage errors.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::manifest::Manifest;

#[derive(Parser, Debug)]
#[command(name = "groundgap", version, about = "Minimum-gap sweeps and annealer-seeded solver benchmarks")]
struct Cli {
    /// Seed driving every stochastic stage.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads; defaults to the number of available cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Output directory.
    #[arg(long, global = true, env = "GROUNDGAP_OUT", default_value = ".")]
    out_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a planted problem ensemble.
    Generate(GenerateArgs),
    /// Scan the minimum gap of every problem in an ensemble.
    Gapscan(GapscanArgs),
    /// Run a preset parameter sweep and fit the curve families.
    Sweep(SweepArgs),
    /// Benchmark sampler-seeded solves against the zero guess.
    Hybrid(HybridArgs),
    /// Fit curve families to two columns of a CSV file.
    Fit(FitArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum KindArg {
    Lls,
    Lse,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    /// Rows (least squares only; square systems use `n`).
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Half-open integer range `lo:hi` for planted entries.
    #[arg(long, default_value = "-2:1", allow_hyphen_values = true)]
    range: String,
    /// Target condition number.
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long, default_value = "ensemble.json")]
    output: String,
}

#[derive(Args, Debug)]
struct GapscanArgs {
    #[arg(long)]
    input: PathBuf,
    /// Bits per variable (two's complement).
    #[arg(long, default_value_t = 2)]
    bits: usize,
    /// Number of schedule points.
    #[arg(long, default_value_t = 100)]
    grid: usize,
    /// Scan the Ising model without range scaling.
    #[arg(long)]
    unscaled: bool,
    #[arg(long, default_value_t = groundgap::spectral::DEFAULT_MAX_QUBITS)]
    max_qubits: usize,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// precision, variables, rows or condition.
    name: String,
    #[arg(long)]
    per_value: Option<usize>,
    /// Comma-separated sweep values replacing the preset list.
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    unscaled: bool,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    c: Option<usize>,
    /// Comma-separated curve families; defaults depend on the sweep.
    #[arg(long, value_delimiter = ',')]
    families: Option<Vec<String>>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum SamplerArg {
    Exhaustive,
    Sa,
}

#[derive(Args, Debug)]
struct HybridArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = SamplerArg::Exhaustive)]
    sampler: SamplerArg,
    #[arg(long, default_value_t = 1000)]
    reads: usize,
    #[arg(long, default_value_t = 100)]
    sweeps: usize,
    /// Greedy descent on the best read before decoding.
    #[arg(long)]
    post_process: bool,
    /// Bits per variable (two's complement).
    #[arg(long, default_value_t = 4)]
    bits: usize,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long)]
    input: PathBuf,
    /// Curve family, or `all`.
    #[arg(long, default_value = "all")]
    family: String,
    #[arg(long, default_value = "value")]
    x: String,
    #[arg(long, default_value = "median_gmin")]
    y: String,
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<groundgap::Error> for CliError {
    fn from(e: groundgap::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("usage error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    if let Err(e) = std::fs::create_dir_all(&cli.out_dir) {
        eprintln!("error: cannot create {}: {e}", cli.out_dir.display());
        return ExitCode::from(1);
    }
    let name = match &cli.command {
        Command::Generate(_) => "generate".to_string(),
        Command::Gapscan(_) => "gapscan".to_string(),
        Command::Sweep(a) => format!("sweep_{}", a.name),
        Command::Hybrid(_) => "hybrid".to_string(),
        Command::Fit(_) => "fit".to_string(),
    };
    let mut manifest = Manifest::start(&name, cli.seed, cli.jobs);
    let ctx = commands::Context {
        seed: cli.seed,
        out_dir: cli.out_dir.clone(),
    };
    let result = match &cli.command {
        Command::Generate(a) => commands::generate(&ctx, a, &mut manifest),
        Command::Gapscan(a) => commands::gapscan(&ctx, a, &mut manifest),
        Command::Sweep(a) => commands::sweep(&ctx, a, &mut manifest),
        Command::Hybrid(a) => commands::hybrid(&ctx, a, &mut manifest),
        Command::Fit(a) => commands::fit(&ctx, a, &mut manifest),
    };
    let code = match &result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    };
    manifest.finish(result.as_ref().err().map(|e| e.to_string()));
    if let Err(e) = manifest.write(&cli.out_dir) {
        eprintln!("error: writing manifest: {e}");
        return ExitCode::from(1);
    }
    ExitCode::from(code)
}
