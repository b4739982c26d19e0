//! `vibestep` — footstep-vibration identification pipeline.
//!
//! Subcommands cover the whole workflow: `simulate` renders the
//! synthetic dataset, `extract` produces the feature table, `decompose`
//! runs the location-variability study, `fit-transform` fits the
//! discriminant transform offline, `evaluate` measures its effect,
//! `identify` scores features against a saved model, and `run-online`
//! is the composite continual-learning run.
//!
//! Configuration comes from one JSON file (`--config`); command-line
//! flags override individual fields (flags win). Outputs land under
//! `--out` with fixed filenames. Exit codes: 0 success, 2 configuration
//! error, 3 data error, 4 numerical failure; errors print one JSON
//! object on stderr. `VIBESTEP_THREADS` caps worker parallelism.

mod commands;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use vibestep::error::ErrorCategory;

#[derive(Parser, Debug)]
#[command(name = "vibestep", version, about = "Footstep-vibration person identification pipeline")]
struct Cli {
    /// Pipeline configuration JSON; omitted fields take defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Model in log-amplitude space instead of raw band amplitudes
    /// (stored features stay amplitudes; overrides config when set).
    #[arg(long, global = true)]
    log_amplitude: bool,

    /// L2-normalize each modeling vector (after the log map if both
    /// are on; overrides config when set).
    #[arg(long, global = true)]
    l2_normalize: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render the synthetic two-structure dataset (manifest + traces).
    Simulate(SimulateArgs),
    /// Detect footsteps and write the feature table (features.csv).
    Extract(ExtractArgs),
    /// Variability decomposition over fixed-location impulses.
    Decompose(DatasetArgs),
    /// Fit the discriminant transform on labeled walks.
    FitTransform(FitTransformArgs),
    /// Score a feature file against a frozen model checkpoint.
    Identify(IdentifyArgs),
    /// Offline before/after variability evaluation of the transform.
    Evaluate(EvaluateArgs),
    /// Composite online run: seed with one person, stream the rest.
    RunOnline(RunOnlineArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Root RNG seed (overrides config).
    #[arg(long)]
    seed: Option<u64>,
    /// Number of persons per structure (overrides config).
    #[arg(long)]
    persons: Option<usize>,
    /// Walk sessions per person per structure (overrides config).
    #[arg(long)]
    walks: Option<usize>,
    /// Number of sensors along the beam (overrides config).
    #[arg(long)]
    sensors: Option<usize>,
    /// Calibration-grid locations per structure (overrides config).
    #[arg(long)]
    grid: Option<usize>,
    /// Sample rate in Hz (overrides config).
    #[arg(long)]
    sample_rate: Option<f64>,
}

#[derive(Args, Debug)]
struct DatasetArgs {
    /// Dataset manifest path (default: <out>/manifest.json).
    #[arg(long)]
    dataset: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExtractArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
    /// Detection threshold, in robust sigmas over the envelope floor
    /// (overrides the manifest's feature spec).
    #[arg(long)]
    detection_sigma: Option<f64>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum FitScope {
    /// One transform per structure (transform_<structure>.json).
    PerStructure,
    /// One transform over all structures' walks (transform.json).
    Joint,
}

#[derive(Args, Debug)]
struct FitTransformArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
    /// Fit one transform per structure or jointly across structures.
    #[arg(long, value_enum, default_value_t = FitScope::PerStructure)]
    scope: FitScope,
    /// Output dimensionality m (overrides config).
    #[arg(long)]
    n_components: Option<usize>,
    /// Ridge regularization gamma added to within-class scatter
    /// (overrides config).
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Args, Debug)]
struct IdentifyArgs {
    /// Model checkpoint JSON (e.g. model_wood.json from run-online).
    #[arg(long)]
    model: PathBuf,
    /// Optional transform JSON applied before scoring.
    #[arg(long)]
    transform: Option<PathBuf>,
    /// Feature table to score (default: <out>/features.csv).
    #[arg(long)]
    features: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
    /// Output dimensionality m (overrides config).
    #[arg(long)]
    n_components: Option<usize>,
    /// Ridge regularization gamma (overrides config).
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Args, Debug)]
struct RunOnlineArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
    /// Ablation: keep the discriminant transform off for the whole run.
    #[arg(long)]
    no_transform: bool,
    /// Person whose earliest walks seed the model (overrides config;
    /// default: the person of the earliest walk).
    #[arg(long)]
    seed_person: Option<String>,
    /// Seed walk sessions to absorb before streaming (overrides config).
    #[arg(long)]
    seed_walks: Option<usize>,
    /// Cluster size confirming a newcomer (overrides config).
    #[arg(long)]
    confirm: Option<usize>,
    /// CRP concentration alpha (overrides config).
    #[arg(long)]
    alpha: Option<f64>,
    /// Stream assignment granularity (overrides config).
    #[arg(long, value_enum)]
    assignment_mode: Option<ModeArg>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    PerFootstep,
    PerTraceMajority,
}

fn exit_code(category: ErrorCategory) -> i32 {
    match category {
        ErrorCategory::Config => 2,
        ErrorCategory::Data => 3,
        ErrorCategory::Numerical => 4,
    }
}

fn fail(category: ErrorCategory, message: &str) -> ! {
    let payload = serde_json::json!({
        "error": { "category": category.as_str(), "message": message }
    });
    eprintln!("{payload}");
    std::process::exit(exit_code(category));
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            // help/version are not errors
            print!("{e}");
            return;
        }
        Err(e) => fail(ErrorCategory::Config, e.to_string().trim_end()),
    };
    if let Err(e) = vibestep::exec::init_parallelism() {
        fail(e.category(), &e.to_string());
    }
    if let Err(e) = commands::dispatch(cli) {
        fail(e.category(), &e.to_string());
    }
}
