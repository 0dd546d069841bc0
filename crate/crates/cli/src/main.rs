mod commands;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "pawsense",
    version,
    about = "Force and terrain sensing for a robot paw"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct OutArg {
    /// Output directory; defaults to `$PAWSENSE_OUT/<command>` or `pawsense-runs/<command>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Clone)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    #[arg(long)]
    pub lr: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic sole-image dataset.
    GenForce {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Synthesize a terrain impact-sound dataset.
    GenAudio {
        /// Clips per terrain class.
        #[arg(long, default_value_t = 47)]
        per_class: usize,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Train a force regressor on an 80/10/10 split of a force dataset.
    TrainForce {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Hidden layer widths.
        #[arg(long, value_delimiter = ',', default_value = "16,128")]
        hidden: Vec<usize>,
        #[arg(long, default_value_t = 0.0)]
        dropout: f32,
        #[arg(long, default_value_t = 0.0)]
        l2: f32,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        out: OutArg,
    },
    /// Cross-validate and train a terrain classifier.
    TrainTerrain {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, value_delimiter = ',', default_value = "16,16")]
        hidden: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, default_value_t = 0.0)]
        dropout: f32,
        #[arg(long, default_value_t = 0.0)]
        l2: f32,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        out: OutArg,
    },
    /// Grid search over force-model structures and optimizer settings.
    GridForce {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Hidden structures separated by `;`, widths by `,`.
        #[arg(long, default_value = "16,128;8,256;8,64,64;16,32,32")]
        structures: String,
        #[arg(long, value_delimiter = ',', default_value = "0.001")]
        lrs: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        dropouts: Vec<f32>,
        #[arg(long, default_value_t = 0.0)]
        l2: f32,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        out: OutArg,
    },
    /// Evaluate a force model on every sample of a force dataset.
    EvalForce {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        out: OutArg,
    },
    /// Evaluate a terrain model on every clip of a terrain dataset.
    EvalTerrain {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        out: OutArg,
    },
    /// Run a saved model on one image or one recording.
    Infer {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, conflicts_with = "audio", required_unless_present = "audio")]
        image: Option<PathBuf>,
        #[arg(long)]
        audio: Option<PathBuf>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Report parameter, memory and compute budgets of a saved model.
    Audit {
        #[arg(long)]
        model: PathBuf,
        /// RAM ceiling in bytes.
        #[arg(long, default_value_t = pawsense::modelstore::DEFAULT_RAM_CEILING)]
        ram: usize,
        #[command(flatten)]
        out: OutArg,
    },
    /// Time preprocessing plus inference over synthetic inputs.
    Bench {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        passes: usize,
        #[arg(long, default_value_t = 100)]
        warmup: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArg,
    },
}

impl Command {
    /// Files and directories the command reads.
    fn inputs(&self) -> Vec<&std::path::Path> {
        match self {
            Command::GenForce { .. } | Command::GenAudio { .. } => vec![],
            Command::TrainForce { data, .. }
            | Command::TrainTerrain { data, .. }
            | Command::GridForce { data, .. } => vec![data],
            Command::EvalForce { model, data, .. } | Command::EvalTerrain { model, data, .. } => {
                vec![model, data]
            }
            Command::Infer {
                model,
                image,
                audio,
                ..
            } => [Some(model), image.as_ref(), audio.as_ref()]
                .into_iter()
                .flatten()
                .map(PathBuf::as_path)
                .collect(),
            Command::Audit { model, .. } | Command::Bench { model, .. } => vec![model],
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
