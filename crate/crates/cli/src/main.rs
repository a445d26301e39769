use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};

mod commands;
mod config;

/// Wavelet-feature EMG classification with recurrent basic-unit stacks.
#[derive(Parser, Debug)]
#[command(name = "emg-rnn", version)]
pub struct Cli {
    /// Line-oriented `key = value` file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads for per-recording parallelism.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a labeled synthetic dataset and its manifest.
    Synth(SynthArgs),
    /// Write per-window feature CSVs, one file per recording.
    Extract(ExtractCmd),
    /// Train one stack on the manifest's training split.
    Train(TrainCmd),
    /// Accuracy of one or more models on the test split across signal lengths.
    Sweep(SweepCmd),
    /// Measure feature-extraction and classification latency.
    Bench(BenchCmd),
    /// Classify a sample stream segment by segment.
    Predict(PredictCmd),
    /// Dump the wavelet coefficients of a recording as CSV.
    Dwt(DwtCmd),
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Output directory for recordings and `manifest.txt`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub channels: Option<usize>,
    /// Recordings per class.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Recordings per class assigned to the test split.
    #[arg(long)]
    pub test_trials: Option<usize>,
    /// Recording length in seconds.
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub sample_rate: Option<f64>,
    /// Standard deviation of the white background noise.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Default)]
pub struct ExtractArgs {
    #[arg(long)]
    pub window_len: Option<usize>,
    #[arg(long)]
    pub step: Option<usize>,
    /// Wavelet decomposition levels.
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long)]
    pub myop_threshold: Option<f64>,
    #[arg(long)]
    pub wamp_threshold: Option<f64>,
    #[arg(long)]
    pub ialv_offset: Option<f64>,
}

#[derive(Args, Debug, Default)]
pub struct TrainArgs {
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub init_scale: Option<f64>,
    #[arg(long)]
    pub hidden1: Option<usize>,
    #[arg(long)]
    pub hidden2: Option<usize>,
}

#[derive(Args, Debug)]
pub struct ExtractCmd {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// `train`, `test` or `all`.
    #[arg(long, default_value = "all")]
    pub split: String,
    #[command(flatten)]
    pub extract: ExtractArgs,
}

#[derive(Args, Debug)]
pub struct TrainCmd {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// `rnn` or `brnn`.
    #[arg(long)]
    pub arch: Option<String>,
    /// `same` or `sequential`.
    #[arg(long = "input")]
    pub input_mode: Option<String>,
    /// Model file to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Loss-curve CSV; defaults to `<out stem>_loss.csv` next to the model.
    #[arg(long)]
    pub loss_out: Option<PathBuf>,
    #[command(flatten)]
    pub extract: ExtractArgs,
    #[command(flatten)]
    pub train: TrainArgs,
}

#[derive(Args, Debug)]
pub struct SweepCmd {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Model file; repeat for several table rows.
    #[arg(long = "model")]
    pub models: Vec<PathBuf>,
    /// Comma-separated signal lengths in ms.
    #[arg(long, value_delimiter = ',')]
    pub lengths: Option<Vec<f64>>,
    /// Length at which per-class accuracy and confusion matrices are reported.
    #[arg(long)]
    pub per_class_length: Option<f64>,
    /// Directory for CSV/JSON reports; nothing is written when omitted.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchCmd {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Recording file to time on; a synthetic one is used when omitted.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub sample_rate: Option<f64>,
    /// Signal length in ms taken from the start of the recording.
    #[arg(long)]
    pub length_ms: Option<f64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PredictCmd {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Channel-per-column sample file, or `-` for standard input.
    #[arg(long, default_value = "-")]
    pub input: String,
    #[arg(long)]
    pub sample_rate: Option<f64>,
    /// Segment length in ms; one decision line per completed segment.
    #[arg(long)]
    pub length_ms: Option<f64>,
    /// Also print every per-window decision.
    #[arg(long)]
    pub verbose: bool,
}

#[derive(Args, Debug)]
pub struct DwtCmd {
    /// Channel-per-column recording file.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub levels: Option<usize>,
    /// First sample of the decomposed span.
    #[arg(long, default_value_t = 0)]
    pub start: usize,
    /// Span length in samples; defaults to the rest of the recording.
    #[arg(long)]
    pub len: Option<usize>,
    /// CSV output path; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Bad invocation or configuration; exits with status 2.
#[derive(Debug)]
pub struct ConfigError {
    pub error: anyhow::Error,
    pub usage: Option<String>,
}

pub enum Failure {
    Config(ConfigError),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<emg_rnn::Error> for Failure {
    fn from(e: emg_rnn::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

pub trait ConfigContext<T> {
    fn config_err(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> ConfigContext<T> for Result<T, E> {
    fn config_err(self) -> Result<T, Failure> {
        self.map_err(|e| {
            Failure::Config(ConfigError {
                error: e.into(),
                usage: None,
            })
        })
    }
}

/// Config error for a missing required setting, carrying the subcommand usage.
pub fn missing(subcommand: &str, what: &str) -> Failure {
    let mut cmd = Cli::command();
    cmd.build();
    let usage = cmd
        .find_subcommand_mut(subcommand)
        .map(|c| c.render_usage().to_string());
    Failure::Config(ConfigError {
        error: anyhow::anyhow!("missing {what} (pass it as a flag or set it in --config)"),
        usage,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(c)) => {
            eprintln!("error: {:#}", c.error);
            if let Some(u) = c.usage {
                eprintln!("\n{u}\n\nFor more information, try '--help'.");
            }
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
