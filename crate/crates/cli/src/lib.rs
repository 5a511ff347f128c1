//! Command line front end and HTTP session service.
//!
//! [`run`] dispatches one invocation of the `prosocial` binary; [`server`]
//! holds the axum router used by `prosocial serve`.

pub mod args;
mod commands;
pub mod error;
pub mod server;

use std::ffi::OsString;
use std::path::Path;

use clap::Parser;
use prosocial_core::model::default_scores;
use prosocial_core::planner::{solve_pbvi, AlphaVectorPolicy, ModeProcess, PlanConfig};
use prosocial_core::policy::{PolicyKind, PolicyName};
use prosocial_core::trajectory::{builtin_sequence, ModeSequence};
use prosocial_core::{ModelParams, RewardSpec};

pub use args::Cli;
pub use error::{CliError, CliResult};

/// Parses `argv`, runs the command and returns the process exit status.
/// Diagnostics go to stderr.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { CliError::USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    commands::dispatch(cli.command)
}

pub(crate) fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads and checks a model document.
pub fn load_model(path: &Path) -> CliResult<ModelParams> {
    let text = read_text(path)?;
    let params: ModelParams = serde_json::from_str(&text).map_err(|e| CliError::parse(path, e))?;
    params.check()?;
    Ok(params)
}

/// Reward from explicit per-state values, or the exponential form over
/// `scores` (default scores for the model's size when absent).
pub fn build_reward(
    n_states: usize,
    r: f64,
    scores: Option<Vec<f64>>,
    table: Option<Vec<f64>>,
    c_help: f64,
    c_signal: f64,
    gamma: f64,
) -> CliResult<RewardSpec> {
    let spec = match table {
        Some(values) => RewardSpec::tabulated(values, c_help, c_signal, gamma)?,
        None => RewardSpec::exponential(r, scores.unwrap_or_else(|| default_scores(n_states)), c_help, c_signal, gamma)?,
    };
    if spec.n_states() != n_states {
        return Err(CliError::Validation(format!(
            "reward has {} per-state values but the model has {n_states} states",
            spec.n_states()
        )));
    }
    Ok(spec)
}

/// A schedule given either as help-opportunity letters (`HRHRHRHRH`, the
/// built-in schedule names) or, with `modes = true`, as mode letters.
pub fn parse_schedule(text: &str, modes: bool) -> CliResult<ModeSequence> {
    let seq = if modes {
        ModeSequence::from_modes(text)?
    } else {
        match builtin_sequence(text) {
            Some(s) => s,
            None => ModeSequence::from_opportunities(text)?,
        }
    };
    Ok(seq)
}

/// Turns a policy name into a runnable policy. The learned policy comes from
/// `document` when given, otherwise it is solved for `schedule` (or for
/// alternating modes when there is no schedule).
pub fn resolve_policy(
    name: PolicyName,
    model: &ModelParams,
    reward: &RewardSpec,
    schedule: Option<&ModeSequence>,
    document: Option<AlphaVectorPolicy>,
) -> CliResult<PolicyKind> {
    if let Some(kind) = name.baseline() {
        return Ok(kind);
    }
    let policy = match document {
        Some(p) => p,
        None => {
            let process = match schedule {
                Some(s) => ModeProcess::FixedSequence { sequence: s.clone() },
                None => ModeProcess::default(),
            };
            let config = PlanConfig {
                gamma: reward.gamma,
                ..PlanConfig::default()
            };
            solve_pbvi(model, reward, &process, &config)?
        }
    };
    Ok(PolicyKind::LsPomdp(Box::new(policy)))
}
