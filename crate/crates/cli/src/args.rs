use std::path::PathBuf;

use clap::{Args, Subcommand, ValueEnum};
use geohmm::{ConstraintLevel, CoordinateMode};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Global,
    Relative,
}

impl From<Mode> for CoordinateMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Global => CoordinateMode::Global,
            Mode::Relative => CoordinateMode::Relative,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Constraints {
    None,
    Antisym,
    Additive,
}

impl From<Constraints> for ConstraintLevel {
    fn from(c: Constraints) -> Self {
        match c {
            Constraints::None => ConstraintLevel::Unconstrained,
            Constraints::Antisym => ConstraintLevel::AntiSymmetric,
            Constraints::Additive => ConstraintLevel::Additive,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    /// Every sequence learned with and without odometry.
    Table,
    /// Prefixes of one sequence learned with and without odometry.
    Sweep,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Write the synthetic corridor-loop model.
    LoopModel(LoopModelArgs),
    /// Sample an experience sequence from a model.
    Simulate(SimulateArgs),
    /// Build an initial model from an experience sequence.
    Init(InitArgs),
    /// Learn a model with EM, optionally from several restarts.
    Learn(LearnArgs),
    /// Estimate the divergence of a learned model from a true one.
    EvalKl(EvalKlArgs),
    /// Report violated relation constraints.
    Check(CheckArgs),
    /// Draw a model as an SVG map.
    Render(RenderArgs),
    /// Run the with/without-odometry comparison on the loop environment.
    Experiment(ExperimentArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::LoopModel(_) => "loop-model",
            Command::Simulate(_) => "simulate",
            Command::Init(_) => "init",
            Command::Learn(_) => "learn",
            Command::EvalKl(_) => "eval-kl",
            Command::Check(_) => "check",
            Command::Render(_) => "render",
            Command::Experiment(_) => "experiment",
            Command::Replay(_) => "replay",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct LoopModelArgs {
    /// JSON file with loop parameters; missing fields take defaults.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 800)]
    pub length: usize,
    #[arg(long, env = "GEOHMM_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BucketArgs {
    #[arg(long, default_value_t = 40.0)]
    pub sigma_x: f64,
    #[arg(long, default_value_t = 40.0)]
    pub sigma_y: f64,
    /// Radians.
    #[arg(long, default_value_t = 0.1)]
    pub sigma_theta: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct InitArgs {
    #[arg(long)]
    pub experience: PathBuf,
    #[arg(long)]
    pub states: usize,
    #[arg(long, value_enum, default_value_t = Mode::Relative)]
    pub mode: Mode,
    #[command(flatten)]
    #[serde(flatten)]
    pub bucket: BucketArgs,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct LearnArgs {
    #[arg(long)]
    pub experience: PathBuf,
    /// Number of states; required unless an initial model is given.
    #[arg(long)]
    pub states: Option<usize>,
    /// Start from this model instead of the bucket initializer.
    #[arg(long)]
    pub initial: Option<PathBuf>,
    /// Ignore readings and run plain Baum-Welch from random models.
    #[arg(long)]
    pub no_odometry: bool,
    #[arg(long, value_enum, default_value_t = Constraints::Additive)]
    pub constraints: Constraints,
    /// Defaults to the initial model's mode, else relative.
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
    #[arg(long, env = "GEOHMM_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub rel_tol: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub prob_floor: f64,
    /// Weight of the random row mixed into restarts after the first.
    #[arg(long, default_value_t = 0.1)]
    pub jitter: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub bucket: BucketArgs,
    /// Learn on these prefixes of the sequence instead of all of it.
    #[arg(long, value_delimiter = ',')]
    pub prefix_lengths: Vec<usize>,
    /// Learned model; with prefixes, `.prefixN` is inserted before the extension.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Learning report; defaults to the model path with `.report.json`.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvalKlArgs {
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub learned: PathBuf,
    #[arg(long, default_value_t = geohmm::evalkl::DEFAULT_KL_LENGTH)]
    pub length: usize,
    #[arg(long, default_value_t = geohmm::evalkl::DEFAULT_KL_SEQUENCES)]
    pub sequences: usize,
    #[arg(long, env = "GEOHMM_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CheckArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum, default_value_t = Constraints::Additive)]
    pub level: Constraints,
    #[arg(long, default_value_t = geohmm::estimation::CONSTRAINT_TOL)]
    pub tol: f64,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct RenderArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ExperimentArgs {
    #[arg(long, value_enum, default_value_t = ExperimentKind::Table)]
    pub kind: ExperimentKind,
    /// JSON experiment configuration; missing fields take defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub sequences: Option<usize>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub length: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "100,200,300,400,500,600,700,800")]
    pub prefixes: Vec<usize>,
    #[arg(long, env = "GEOHMM_SEED", default_value_t = 1)]
    pub seed: u64,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Compare the regenerated outputs with the existing files instead of
    /// keeping the new ones.
    #[arg(long)]
    pub verify: bool,
}
