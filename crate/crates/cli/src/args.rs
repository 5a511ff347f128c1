//! Command line grammar.

use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use prosocial_core::model::{DEFAULT_COST, DEFAULT_GAMMA, DEFAULT_R};
use prosocial_core::policy::PolicyName;
use prosocial_core::trajectory::EVALUATION_SEQUENCE;

#[derive(Debug, Parser)]
#[command(name = "prosocial", version, about = "Learn, plan and simulate latent prosocial-state models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit models to interaction logs and pick a state count.
    Learn(LearnArgs),
    /// Solve a belief-space policy for a model and write it to a file.
    Plan(PlanArgs),
    /// Compare policies in simulation.
    Simulate(SimulateArgs),
    /// First decisions over a grid of reward exponents and action costs.
    Sweep(SweepArgs),
    /// Run the HTTP session service.
    Serve(ServeArgs),
    /// Check model, trajectory and policy files.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RewardArgs {
    /// Exponent of the exponential prosocial reward.
    #[arg(long = "reward-r", default_value_t = DEFAULT_R)]
    pub reward_r: f64,
    /// Per-state scores for the exponential reward (comma separated).
    #[arg(long, value_delimiter = ',', conflicts_with = "reward_table")]
    pub scores: Option<Vec<f64>>,
    /// Explicit per-state prosocial values, used instead of the exponential form.
    #[arg(long = "reward-table", value_delimiter = ',')]
    pub reward_table: Option<Vec<f64>>,
    #[arg(long = "cost-help", default_value_t = DEFAULT_COST)]
    pub cost_help: f64,
    #[arg(long = "cost-signal", default_value_t = DEFAULT_COST)]
    pub cost_signal: f64,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    pub gamma: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ScheduleArgs {
    /// Round schedule as help-opportunity letters: `H` means the human can
    /// help (the robot is trapped).
    #[arg(long, default_value = EVALUATION_SEQUENCE, conflicts_with = "modes")]
    pub sequence: String,
    /// Round schedule as mode letters: `H` means the human needs help.
    #[arg(long)]
    pub modes: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DataFormat {
    Auto,
    Jsonl,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SelectBy {
    Bic,
    Loglik,
}

#[derive(Debug, Args)]
pub struct LearnArgs {
    /// Trajectory file (JSONL or CSV).
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = DataFormat::Auto)]
    pub format: DataFormat,
    /// Candidate state counts: `3`, `2..5` (inclusive) or `2,3,4`.
    #[arg(long, default_value = "2..5")]
    pub states: String,
    #[arg(long, default_value_t = 30)]
    pub restarts: usize,
    #[arg(long = "max-iters", default_value_t = 500)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, value_enum, default_value_t = SelectBy::Bic)]
    pub criterion: SelectBy,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Where to write the chosen model.
    #[arg(long)]
    pub out: PathBuf,
    /// Where to write the fit report (defaults to `<out>.report.json`).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProcessKind {
    /// Plan for exactly the rounds of the schedule.
    Fixed,
    /// Unbounded horizon with modes alternating from the schedule's first mode.
    Alternating,
    /// Unbounded horizon with independently drawn modes.
    Iid,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub reward: RewardArgs,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    #[arg(long, value_enum, default_value_t = ProcessKind::Fixed)]
    pub process: ProcessKind,
    /// Probability that the robot needs help, for `--process iid`.
    #[arg(long = "p-r", default_value_t = 0.5)]
    pub p_r: f64,
    /// Belief points per stage (fixed) or in total (unbounded).
    #[arg(long, default_value_t = 400)]
    pub points: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub epsilon: f64,
    #[arg(long = "max-iters", default_value_t = 2000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Model the robot uses for its beliefs and plans.
    #[arg(long)]
    pub model: PathBuf,
    /// Model that generates the simulated human (defaults to `--model`).
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Policies to compare.
    #[arg(long, value_delimiter = ',', default_value = "never,always,myopic,reactive,lspomdp")]
    pub policy: Vec<PolicyName>,
    /// Solved policy for `lspomdp`; solved on the fly when absent.
    #[arg(long = "policy-file")]
    pub policy_file: Option<PathBuf>,
    #[command(flatten)]
    pub reward: RewardArgs,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    #[arg(long, default_value_t = 10_000)]
    pub episodes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON report.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-round series as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    pub gamma: f64,
    /// Per-state scores (defaults follow the model size).
    #[arg(long, value_delimiter = ',')]
    pub scores: Option<Vec<f64>>,
    #[arg(long = "r-values", value_delimiter = ',')]
    pub r_values: Option<Vec<f64>>,
    /// Each value is used for both the help and the signal cost.
    #[arg(long, value_delimiter = ',')]
    pub costs: Option<Vec<f64>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    /// Append every completed round to `<dir>/<session>.jsonl`.
    #[arg(long = "log-dir")]
    pub log_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Trajectory file (JSONL or CSV).
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = DataFormat::Auto)]
    pub format: DataFormat,
    /// Policy document to check against `--model`.
    #[arg(long = "policy-file", requires = "model")]
    pub policy_file: Option<PathBuf>,
}
