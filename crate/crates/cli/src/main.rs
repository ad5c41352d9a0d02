//! `meshfield` command-line tool.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 missing or
//! malformed data, 4 numerical failure.

mod ablate;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Failure of a command, mapped to the process exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Lib(meshfield::Error),
}

impl From<meshfield::Error> for Failure {
    fn from(e: meshfield::Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        use meshfield::Error as E;
        match self {
            Failure::Usage(_) | Failure::Lib(E::Config(_) | E::Argument(_)) => 2,
            Failure::Lib(E::Numerical(_) | E::DegenerateBlend { .. }) => 4,
            Failure::Lib(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "{m}"),
            Failure::Lib(e) => write!(f, "{e}"),
        }
    }
}

#[derive(Parser)]
#[command(name = "meshfield", version, about = "Mesh-guided radiance fields for articulated bodies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic training sequence and its novel-pose companion.
    Synth(SynthArgs),
    /// Fit a field and per-frame poses to a sequence directory.
    Train(TrainArgs),
    /// Render frames from a checkpoint.
    Render(RenderArgs),
    /// Compare rendered frames with ground truth and write a metric report.
    Eval(EvalArgs),
    /// Train every embedding variant on one scene and tabulate the results.
    Ablate(AblateArgs),
    /// Compare analytic gradients with finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
pub struct SynthArgs {
    /// Sequence spec as JSON; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory; receives `train/` and `novel_pose/`.
    #[arg(long)]
    pub out: PathBuf,
    /// Override a config key, e.g. `--set pose_noise=0.08`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Args)]
pub struct TrainArgs {
    /// Sequence directory, or a `synth` output containing `train/`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Run directory for the checkpoint, log and resolved config.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub iterations: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Continue from the checkpoint in the run directory.
    #[arg(long)]
    pub resume: bool,
    /// Iterations between checkpoints; 0 writes only the final one.
    #[arg(long, default_value_t = 1000)]
    pub checkpoint_every: u64,
}

#[derive(Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Output directory for `frame_%04d.png`.
    #[arg(long)]
    pub out: PathBuf,
    /// Poses to render: a `poses.json` (its ground-truth poses) or a JSON
    /// list of poses. Defaults to the optimized training poses.
    #[arg(long)]
    pub poses: Option<PathBuf>,
    /// Camera JSON used with `--poses`; defaults to the first training camera.
    #[arg(long)]
    pub camera: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum SplitArg {
    Train,
    NovelPose,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub rendered: PathBuf,
    /// Ground-truth sequence directory.
    #[arg(long)]
    pub truth: PathBuf,
    /// Restrict metrics to the ground-truth masks.
    #[arg(long)]
    pub masked: bool,
    #[arg(long, value_enum, default_value = "train")]
    pub split: SplitArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct AblateArgs {
    /// A `synth` output directory with `train/` and `novel_pose/`.
    #[arg(long)]
    pub data: PathBuf,
    /// Base training config shared by all variants.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for `ablation.json` and `ablation.md`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub iterations: Option<u64>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Restrict the distance modes, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub distance: Vec<String>,
    /// Restrict the direction modes, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub direction: Vec<String>,
    /// Restrict the neighbor rules, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub neighbors: Vec<String>,
}

#[derive(Args)]
pub struct GradcheckArgs {
    /// Gradient-check settings as JSON; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Optional JSON report path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Train(a) => commands::train(a),
        Command::Render(a) => commands::render(a),
        Command::Eval(a) => commands::eval(a),
        Command::Ablate(a) => ablate::run(a),
        Command::Gradcheck(a) => commands::gradcheck(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
