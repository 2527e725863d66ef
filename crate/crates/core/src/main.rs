//! Command-line front end: run experiments, summarize results, validate
//! configs, and export feasibility problems for external cross-checks.
//!
//! Exit codes: 0 success, 1 usage or runtime error, 2 validation failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use daamimo::config::{EstimatorKind, FadingMode, NetworkConfig};
use daamimo::covariance::build_covariance_set;
use daamimo::error::Error;
use daamimo::estimation::{estimator_stats, pilot_gram};
use daamimo::geometry::build_layout;
use daamimo::harness::{
    run_experiment, summarize, summary_csv, Allocator, DaaSplit, ExperimentResults,
    ExperimentSpec,
};
use daamimo::power_control::build_feasibility;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "daamimo", version, about = "Downlink max-min power control for multi-cell massive MIMO with distributed antenna arrays")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a multi-drop experiment sweep and write JSON results.
    Run(RunArgs),
    /// Reduce a results file to median / 95%-likely / CDF statistics.
    Summarize(SummarizeArgs),
    /// Validate a scenario config file.
    Validate(ValidateArgs),
    /// Export the conic feasibility problem for one drop as plain text.
    ExportCone(ExportConeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Correlated,
    Uncorrelated,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Mmse,
    Ewmmse,
}

#[derive(Clone, Copy, ValueEnum)]
enum AllocatorArg {
    Maxmin,
    Equalnu,
    Both,
}

impl AllocatorArg {
    fn allocators(self) -> Vec<Allocator> {
        match self {
            AllocatorArg::Maxmin => vec![Allocator::MaxMin],
            AllocatorArg::Equalnu => vec![Allocator::EqualNu],
            AllocatorArg::Both => vec![Allocator::MaxMin, Allocator::EqualNu],
        }
    }
}

/// Scenario options shared by the scenario-building subcommands.
#[derive(Args)]
struct ScenarioArgs {
    /// Scenario config file (JSON); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the fading mode.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Override the channel estimator.
    #[arg(long, value_enum)]
    estimator: Option<EstimatorArg>,
}

impl ScenarioArgs {
    fn load(&self) -> Result<NetworkConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Runtime(format!("reading {}: {e}", path.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::Validation(format!("parsing {}: {e}", path.display())))?
            }
            None => NetworkConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.rng_seed = seed;
        }
        if let Some(mode) = self.mode {
            config.fading_mode = match mode {
                ModeArg::Correlated => FadingMode::Correlated,
                ModeArg::Uncorrelated => FadingMode::Uncorrelated,
            };
        }
        if let Some(estimator) = self.estimator {
            config.estimator = match estimator {
                EstimatorArg::Mmse => EstimatorKind::Mmse,
                EstimatorArg::Ewmmse => EstimatorKind::EwMmse,
            };
        }
        config.validate().map_err(CliError::from_validation)?;
        Ok(config)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Number of independent drops per antenna split.
    #[arg(long, default_value_t = 10)]
    drops: usize,
    /// Antenna splits as NxM pairs, e.g. "1x40,5x8"; defaults to the
    /// config's own (N, M).
    #[arg(long)]
    splits: Option<String>,
    /// Power allocation strategy.
    #[arg(long, value_enum, default_value_t = AllocatorArg::Both)]
    allocator: AllocatorArg,
    /// Output path for the results JSON; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SummarizeArgs {
    /// Results JSON produced by `run`.
    results: PathBuf,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Emit CSV (one row per split and allocator) instead of JSON.
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
}

#[derive(Args)]
struct ExportConeArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// SINR target of the exported feasibility problem.
    #[arg(long)]
    gamma: f64,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    fn from_validation(e: Error) -> Self {
        CliError::Validation(e.to_string())
    }

    fn from_error(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_) => CliError::Validation(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

fn parse_splits(text: &str) -> Result<Vec<DaaSplit>, CliError> {
    text.split(',')
        .map(|part| {
            let (n, m) = part
                .trim()
                .split_once(['x', 'X'])
                .ok_or_else(|| CliError::Validation(format!("bad split '{part}', want NxM")))?;
            Ok(DaaSplit {
                subarrays: n
                    .parse()
                    .map_err(|_| CliError::Validation(format!("bad split '{part}'")))?,
                antennas: m
                    .parse()
                    .map_err(|_| CliError::Validation(format!("bad split '{part}'")))?,
            })
        })
        .collect()
}

fn write_output(out: &Option<PathBuf>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display()))),
        None => {
            println!("{content}");
            Ok(())
        }
    }
}

fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let base = args.scenario.load()?;
    let splits = match &args.splits {
        Some(text) => parse_splits(text)?,
        None => vec![DaaSplit {
            subarrays: base.subarrays_per_cell,
            antennas: base.antennas_per_subarray,
        }],
    };
    let spec = ExperimentSpec {
        base,
        splits,
        drops: args.drops,
        allocators: args.allocator.allocators(),
    };
    spec.validate().map_err(CliError::from_validation)?;
    let results = run_experiment(&spec).map_err(CliError::from_error)?;
    let json = serde_json::to_string_pretty(&results)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    write_output(&args.out, &json)
}

fn cmd_summarize(args: &SummarizeArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.results)
        .map_err(|e| CliError::Runtime(format!("reading {}: {e}", args.results.display())))?;
    let results: ExperimentResults = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("parsing {}: {e}", args.results.display())))?;
    let summary = summarize(&results).map_err(CliError::from_error)?;
    let content = if args.csv {
        summary_csv(&summary)
    } else {
        serde_json::to_string_pretty(&summary).map_err(|e| CliError::Runtime(e.to_string()))?
    };
    write_output(&args.out, &content)
}

fn cmd_export_cone(args: &ExportConeArgs) -> Result<(), CliError> {
    let config = args.scenario.load()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let layout = build_layout(&config, &mut rng).map_err(CliError::from_error)?;
    let cov = build_covariance_set(&config, &layout, &mut rng).map_err(CliError::from_error)?;
    let stats = estimator_stats(&cov, &pilot_gram(&config), &config)
        .map_err(CliError::from_error)?;
    let problem = build_feasibility(&stats, config.noise_power, args.gamma)
        .map_err(CliError::from_error)?;
    write_output(&args.out, &problem.export_text())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not errors.
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Summarize(args) => cmd_summarize(args),
        Command::Validate(args) => args.scenario.load().map(|config| {
            println!(
                "ok: L={} K={} N={} M={}",
                config.cells,
                config.users_per_cell,
                config.subarrays_per_cell,
                config.antennas_per_subarray
            );
        }),
        Command::ExportCone(args) => cmd_export_cone(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(msg)) => {
            eprintln!("validation error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
