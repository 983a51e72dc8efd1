//! `viewport`: synthesize cohorts, build features, train, predict, evaluate
//! and compare subtitle-aware viewport predictors.

mod commands;
mod config;
mod dataset;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use viewport_core::eval::RmseMode;
use viewport_core::predictor::Variant;

#[derive(Debug, Parser)]
#[command(name = "viewport", version, about = "Subtitle-aware viewport prediction for 360-degree video")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
#[command(next_help_heading = "Global options")]
pub struct GlobalArgs {
    /// Master seed; overrides any seed in the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML config with optional [data], [scenario] and [model] tables.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Only log errors.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic cohort: trajectories, subtitles, lexicon.
    Synth(SynthArgs),
    /// Compute saliency maps and subtitle features for a dataset.
    Featurize(DataArgs),
    /// Train one model variant with a leave-videos-out split.
    Train(TrainArgs),
    /// Write closed-loop predictions for every window of the test videos.
    Predict(PredictArgs),
    /// Score a checkpoint or a prediction trace.
    Eval(EvalArgs),
    /// Rank evaluation reports and merge their per-step curves.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of videos, named v01, v02, ...
    #[arg(long, default_value_t = 1)]
    pub videos: usize,
    /// Viewers per video who see the subtitles.
    #[arg(long, default_value_t = 9)]
    pub guided: usize,
    /// Viewers per video who do not.
    #[arg(long, default_value_t = 9)]
    pub unguided: usize,
    /// Video length in seconds.
    #[arg(long)]
    pub duration: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset directory with trajectories.csv and optional groups.csv,
    /// lexicon.txt and <video>.srt/.vtt files.
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Held-out videos (comma separated). Defaults to the last video id.
    #[arg(long, value_delimiter = ',')]
    pub test_videos: Vec<String>,
    /// Training videos (comma separated). Defaults to every other video.
    #[arg(long, value_delimiter = ',')]
    pub train_videos: Vec<String>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    /// full, no_subtitle or trajectory_only.
    #[arg(long, default_value = "full")]
    pub variant: Variant,
    /// Overrides the configured epoch count.
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Checkpoint written by `train`.
    #[arg(long)]
    pub model: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint to evaluate on the test videos of --data.
    #[arg(long, requires = "data", conflicts_with = "predictions")]
    pub model: Option<PathBuf>,
    /// Dataset directory the checkpoint is evaluated on.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Prediction trace written by `predict`, scored instead of a checkpoint.
    #[arg(long, required_unless_present = "model")]
    pub predictions: Option<PathBuf>,
    /// Report name; defaults to the model variant.
    #[arg(long)]
    pub name: Option<String>,
    /// RMSE formula; paper-compat halves the mean square inside the root.
    #[arg(long, value_enum, default_value = "standard")]
    pub rmse_mode: RmseModeArg,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum RmseModeArg {
    Standard,
    PaperCompat,
}

impl From<RmseModeArg> for RmseMode {
    fn from(m: RmseModeArg) -> Self {
        match m {
            RmseModeArg::Standard => RmseMode::Standard,
            RmseModeArg::PaperCompat => RmseMode::PaperCompat,
        }
    }
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Report JSON files written by `eval`.
    #[arg(required = true, num_args = 2..)]
    pub reports: Vec<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.global.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match commands::run(&cli.global, &cli.command, std::env::args().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
