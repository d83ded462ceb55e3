//! `vtinv`: feature extraction, corpus preparation, training, evaluation
//! and reporting from the command line.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vtinv::corpus::Articulator;
use vtinv::models::Variant;
use vtinv::training::Approach;

/// Exit codes.
const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Parser)]
#[command(name = "vtinv", version, about = "Acoustic-to-articulatory inversion toolkit")]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract 39-dim MFCC+Δ+ΔΔ frames from every WAV in a directory.
    Features(FeaturesArgs),
    /// Generate a synthetic paired audio-feature/contour corpus.
    Synth(SynthArgs),
    /// Split a corpus by acquisition and fit normalization statistics.
    Prepare(PrepareArgs),
    /// Train an experiment and evaluate it on the test split.
    Train(TrainArgs),
    /// Evaluate saved checkpoints (or the mean-contour baseline).
    Evaluate(EvaluateArgs),
    /// Render a comparison table of evaluated runs.
    Report(ReportArgs),
    /// Draw predicted over original contours as SVG.
    Plot(PlotArgs),
    /// Compare analytic gradients with finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
pub struct FeaturesArgs {
    #[arg(long)]
    pub wav_dir: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// MFCC settings (TOML); defaults otherwise.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Pad the tail so the frame grid pairs with 50 fps contours.
    #[arg(long)]
    pub aligned: bool,
    /// Write CSV instead of binary `.vtf`.
    #[arg(long)]
    pub csv: bool,
}

#[derive(Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub acquisitions: usize,
    #[arg(long, default_value_t = 10)]
    pub utterances: usize,
    /// Acoustic frames per utterance (even, ≥ 40).
    #[arg(long, default_value_t = 200)]
    pub frames: usize,
    #[arg(long, default_value_t = 6)]
    pub latent_dim: usize,
    #[arg(long, default_value_t = 8)]
    pub sinusoids: usize,
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Args)]
pub struct PrepareArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Seed of the acquisition shuffle.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Acoustic context radius (5 gives 11-frame windows).
    #[arg(long, default_value_t = 0)]
    pub context_radius: usize,
    /// Recordings on either side used for contour normalization.
    #[arg(long, default_value_t = vtinv::corpus::CONTOUR_HALF_WINDOW)]
    pub half_window: usize,
    /// MFCC settings (TOML) for manifests that reference WAV files.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub struct TrainArgs {
    /// Experiment file (TOML); flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Prepared-corpus directory.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// ST-5, ST-8, MT-5 or ST-5-cw11.
    #[arg(long)]
    pub variant: Option<Variant>,
    /// ABA or AAT.
    #[arg(long)]
    pub approach: Option<Approach>,
    /// ABA only: comma-separated articulator names (default all eight).
    #[arg(long, value_delimiter = ',')]
    pub articulators: Option<Vec<Articulator>>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Accepted for scripts; outputs carry no timestamps either way.
    #[arg(long)]
    pub deterministic: bool,
}

#[derive(Args)]
pub struct EvaluateArgs {
    /// Run directory holding `checkpoints/`.
    #[arg(long, required_unless_present = "mean_baseline", conflicts_with = "mean_baseline")]
    pub run: Option<PathBuf>,
    /// Evaluate the training-set mean contour instead of checkpoints.
    #[arg(long)]
    pub mean_baseline: bool,
    /// Prepared-corpus directory.
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory (defaults to the run directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write predicted and original contour CSVs per test utterance.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
}

#[derive(Args)]
pub struct ReportArgs {
    /// Run directories (each with frame_errors.csv).
    #[arg(long, num_args = 1.., required = true)]
    pub runs: Vec<PathBuf>,
    /// Run directory or label to test the others against.
    #[arg(long)]
    pub baseline: Option<String>,
    /// Output prefix; writes `<out>.txt` and `<out>.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, num_args = 1.., required = true)]
    pub frame: Vec<usize>,
    /// Output directory for `frame_<n>.svg`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = vtinv::corpus::PIXEL_SPACING_MM)]
    pub pixel_spacing: f64,
}

#[derive(Args)]
pub struct GradcheckArgs {
    /// Layers and variants to check (default: all).
    #[arg(long, value_delimiter = ',')]
    pub only: Option<Vec<String>>,
    /// Hidden width of the variant networks.
    #[arg(long, default_value_t = 5)]
    pub hidden: usize,
    #[arg(long, default_value_t = 4)]
    pub frames: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub eps: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    #[arg(long, default_value_t = vtinv::nn::MIN_CHECKED)]
    pub coords: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Why a command failed, mapped onto the exit code.
pub enum Failure {
    Data(String),
    Numeric(String),
}

impl From<vtinv::Error> for Failure {
    fn from(e: vtinv::Error) -> Self {
        if e.is_numeric() {
            Failure::Numeric(e.to_string())
        } else {
            Failure::Data(e.to_string())
        }
    }
}

fn init_threads() -> Result<(), String> {
    let Ok(value) = std::env::var("VT_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("VT_THREADS must be a positive integer, got '{value}'"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(msg) = init_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_USAGE);
    }
    let result = match cli.command {
        Command::Features(a) => commands::features(a),
        Command::Synth(a) => commands::synth(a),
        Command::Prepare(a) => commands::prepare(a),
        Command::Train(a) => commands::train(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Report(a) => commands::report(a),
        Command::Plot(a) => commands::plot(a),
        Command::Gradcheck(a) => commands::gradcheck(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_DATA)
        }
        Err(Failure::Numeric(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_NUMERIC)
        }
    }
}
