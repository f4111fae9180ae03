mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sensorfield::Error;

#[derive(Parser)]
#[command(
    name = "sensorfield",
    version,
    about = "Design and analyze linear estimators over sensor networks"
)]
struct Cli {
    /// Worker threads for map sweeps and Monte Carlo runs.
    #[arg(long, global = true, env = "SENSORFIELD_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Certify that a placement determines its model.
    CheckPlacement {
        scenario: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Synthesize estimators for the scenario's targets.
    Estimate(EstimateArgs),
    /// Precision gain of the interpolation estimator over a grid.
    GainMap(MapArgs),
    /// Interpolation error against a polynomial field over a grid.
    ErrorMap {
        #[command(flatten)]
        map: MapArgs,
        /// Polynomial such as "(x-1)^3+(y-1)^3"; variables x,y,z or x1..xm.
        #[arg(long)]
        field: String,
    },
    /// Split a resource budget across sensors.
    Allocate(AllocateArgs),
    /// Compare Monte Carlo and analytic estimator variance.
    ValidateMc(ValidateArgs),
}

#[derive(Args)]
struct EstimateArgs {
    scenario: PathBuf,
    /// Index into the scenario's target list; all targets when omitted.
    #[arg(long)]
    target: Option<usize>,
    /// Strategies whose variance to report (needs scenario resources).
    #[arg(long, value_enum, value_delimiter = ',')]
    strategy: Vec<StrategyArg>,
    #[arg(long, value_enum, default_value = "direct")]
    method: MethodArg,
    /// Write the JSON records to this file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct MapArgs {
    scenario: PathBuf,
    /// Points per axis, e.g. "101" or "101,51".
    #[arg(long)]
    grid: Option<String>,
    /// Per-axis bounds, e.g. "0,2;0,2"; defaults to the sensor bounding box.
    #[arg(long)]
    bounds: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AllocateArgs {
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        required = true
    )]
    coeffs: Vec<f64>,
    #[arg(long)]
    resources: f64,
    #[arg(long, value_enum, default_value = "nonlocal")]
    strategy: StrategyArg,
    /// Exponent on n_j for the general strategy.
    #[arg(long)]
    p: Option<f64>,
    /// Exponent on |c_j| for the general strategy.
    #[arg(long)]
    q: Option<f64>,
    #[arg(long, default_value_t = 1)]
    repetitions: u32,
    /// Also report a largest-remainder integer allocation.
    #[arg(long)]
    round: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        required = true
    )]
    coeffs: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    alloc: Vec<f64>,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "quantum")]
    scaling: ScalingArg,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StrategyArg {
    Nonlocal,
    Local,
    Classical,
    General,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Direct,
    Nearest,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScalingArg {
    Quantum,
    Classical,
}

/// Outcome of a command that ran to completion.
pub enum Outcome {
    Success,
    /// The analysis ran but the property being checked does not hold.
    Failed,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::RankDeficient { .. } | Error::Undetermined(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: could not configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::CheckPlacement { scenario, json } => commands::check_placement(&scenario, json),
        Command::Estimate(args) => commands::estimate(args),
        Command::GainMap(args) => commands::gain_map(args),
        Command::ErrorMap { map, field } => commands::error_map(map, &field),
        Command::Allocate(args) => commands::allocate(args),
        Command::ValidateMc(args) => commands::validate_mc(args),
    };
    match result {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::Failed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
