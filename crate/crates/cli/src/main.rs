use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

/// Segment lungs, heart and clavicles in chest radiographs.
///
/// Settings are resolved in this order, later winning: config file,
/// environment variables and flags, trailing KEY=VALUE overrides, `--seed`.
#[derive(Debug, Parser)]
#[command(name = "thoraxseg", version)]
struct Cli {
    /// Master seed; replaces `trainer.seed` and the seed of `verify`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Compute device. Only `cpu` is supported.
    #[arg(long, global = true, env = "THORAXSEG_DEVICE", default_value = "cpu")]
    device: String,

    /// Directory holding checkpoints (`<runs>/<name>/fold<k>/`).
    #[arg(long, global = true, default_value = "runs")]
    runs_dir: PathBuf,

    /// Directory holding evaluation outputs and tables.
    #[arg(long, global = true, default_value = "report")]
    report_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a corpus and cache its fold split.
    Ingest(IngestArgs),
    /// Train one model per fold.
    Train(ExperimentArgs),
    /// Score both fold checkpoints on their held-out folds.
    Evaluate(EvaluateArgs),
    /// Write predicted masks for arbitrary radiographs.
    Predict(PredictArgs),
    /// Assemble evaluated runs into a comparison table.
    Report(ReportArgs),
    /// Run the built-in property suites.
    Verify,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Corpus root with images/, masks/ and folds.csv.
    #[arg(long, env = "THORAXSEG_DATA_ROOT")]
    data: Option<PathBuf>,

    /// Accept any two nonempty folds instead of the 124/123 benchmark split.
    #[arg(long)]
    any_size: bool,
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[command(flatten)]
    data: DataArgs,

    /// Resolution the masks are checked at.
    #[arg(long, default_value_t = thoraxseg::dataset::WORKING_SIZE)]
    size: usize,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// Experiment config (TOML).
    #[arg(long, short)]
    config: PathBuf,

    #[command(flatten)]
    data: DataArgs,

    /// VGG-16 weight archive for pretrained encoders.
    #[arg(long, env = "THORAXSEG_VGG16_WEIGHTS")]
    weights: Option<PathBuf>,

    /// Dotted config overrides, e.g. `trainer.lr=1e-4`.
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,

    /// Skip writing overlay images.
    #[arg(long)]
    no_overlays: bool,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Checkpoint directory (`<runs>/<name>/fold<k>`).
    #[arg(long)]
    checkpoint: PathBuf,

    /// Output directory; masks go to `<out>/<structure>/<case>.png`.
    #[arg(long)]
    out: PathBuf,

    /// Score threshold.
    #[arg(long, default_value_t = thoraxseg::PostprocParams::default().threshold)]
    threshold: f32,

    /// Threshold only, without small-object removal or hole filling.
    #[arg(long)]
    raw: bool,

    /// Resample masks to the resolution of each input image.
    #[arg(long)]
    native_size: bool,

    /// Pixel spacing (mm) assumed for raster inputs.
    #[arg(long, default_value_t = thoraxseg::dataset::JSRT_SPACING_MM)]
    spacing_mm: f64,

    /// Radiographs: raw JSRT files or 8/16-bit grayscale images.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Evaluated run names (directories under the report dir).
    #[arg(long = "run", required = true, num_args = 1..)]
    runs: Vec<String>,

    /// arch_table | loss_table | sota_table
    #[arg(long)]
    layout: String,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match commands::run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
