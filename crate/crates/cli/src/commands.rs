use std::path::{Path, PathBuf};

use prosocial_core::em::{select_model, Criterion, EmConfig};
use prosocial_core::model::{default_scores, validate, Severity};
use prosocial_core::planner::{exact_value, solve_pbvi, AlphaVectorPolicy, ModeProcess, PlanConfig};
use prosocial_core::sim::{compare_policies, sensitivity_sweep, ScoreMap, SweepGrid};
use prosocial_core::trajectory::{load_trajectories, Format, ModeSequence, TrajectorySet};
use prosocial_core::{ModelParams, RewardSpec};

use crate::args::*;
use crate::{build_reward, load_model, parse_schedule, read_text, resolve_policy, write_text, CliError, CliResult};

pub(crate) fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Learn(a) => learn(a),
        Command::Plan(a) => plan(a),
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a),
        Command::Serve(a) => crate::server::serve_blocking(a.addr, a.log_dir),
        Command::Validate(a) => validate_files(a),
    }
}

fn reward_for(model: &ModelParams, a: &RewardArgs) -> CliResult<RewardSpec> {
    build_reward(
        model.n_states,
        a.reward_r,
        a.scores.clone(),
        a.reward_table.clone(),
        a.cost_help,
        a.cost_signal,
        a.gamma,
    )
}

fn schedule_for(a: &ScheduleArgs) -> CliResult<ModeSequence> {
    match &a.modes {
        Some(m) => parse_schedule(m, true),
        None => parse_schedule(&a.sequence, false),
    }
}

fn load_data(path: &Path, format: DataFormat) -> CliResult<TrajectorySet> {
    let format = match format {
        DataFormat::Auto => Format::from_path(path),
        DataFormat::Jsonl => Format::Jsonl,
        DataFormat::Csv => Format::Csv,
    };
    let file = std::fs::File::open(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(load_trajectories(std::io::BufReader::new(file), format)?)
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report types serialize")
}

/// Parses `3`, `2..5` (inclusive) or `2,3,4`.
pub(crate) fn parse_state_counts(text: &str) -> CliResult<Vec<usize>> {
    let bad = || CliError::Usage(format!("cannot read state counts from {text:?}"));
    let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    let counts: Vec<usize> = if let Some((lo, hi)) = text.split_once("..") {
        let hi = hi.strip_prefix('=').unwrap_or(hi);
        let (lo, hi) = (num(lo)?, num(hi)?);
        if lo > hi {
            return Err(bad());
        }
        (lo..=hi).collect()
    } else {
        text.split(',').map(num).collect::<CliResult<_>>()?
    };
    if counts.is_empty() || counts.contains(&0) {
        return Err(bad());
    }
    Ok(counts)
}

fn learn(a: LearnArgs) -> CliResult<()> {
    let counts = parse_state_counts(&a.states)?;
    let data = load_data(&a.data, a.format)?;
    let config = EmConfig {
        n_restarts: a.restarts,
        max_iters: a.max_iters,
        tol: a.tol,
        seed: a.seed,
        ..EmConfig::new(counts[0])
    };
    let criterion = match a.criterion {
        SelectBy::Bic => Criterion::Bic,
        SelectBy::Loglik => Criterion::Loglik,
    };
    let report = select_model(&data, &counts, &config, criterion)?;
    write_text(&a.out, &report.chosen().params.to_json_pretty())?;
    let report_path = a.report.unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".report.json");
        PathBuf::from(p)
    });
    write_text(&report_path, &to_json(&report))?;
    println!("{} trajectories, {} events", data.len(), data.n_events());
    println!("{:>8} {:>14} {:>14} {:>10}", "states", "loglik", "bic", "converged");
    for c in &report.candidates {
        let converged = c.converged.iter().filter(|x| **x).count();
        let mark = if c.n_states == report.chosen_n_states { " *" } else { "" };
        println!(
            "{:>8} {:>14.3} {:>14.3} {:>7}/{:<2}{mark}",
            c.n_states,
            c.loglik,
            c.bic,
            converged,
            c.converged.len()
        );
    }
    println!("model: {}", a.out.display());
    println!("report: {}", report_path.display());
    Ok(())
}

fn plan(a: PlanArgs) -> CliResult<()> {
    let model = load_model(&a.model)?;
    let reward = reward_for(&model, &a.reward)?;
    let schedule = schedule_for(&a.schedule)?;
    let process = match a.process {
        ProcessKind::Fixed => ModeProcess::FixedSequence {
            sequence: schedule.clone(),
        },
        ProcessKind::Alternating => ModeProcess::Alternating {
            start: schedule.modes[0],
        },
        ProcessKind::Iid => ModeProcess::Iid { p_r: a.p_r },
    };
    let config = PlanConfig {
        gamma: reward.gamma,
        horizon: None,
        max_belief_points: a.points,
        epsilon: a.epsilon,
        max_iterations: a.max_iters,
        seed: a.seed,
    };
    let policy = solve_pbvi(&model, &reward, &process, &config)?;
    write_text(&a.out, &policy.to_json_pretty())?;
    let b0 = &model.initial_belief;
    let first = schedule.modes[0];
    println!(
        "{} vectors over {} stage(s), residual {:.2e}, converged {}",
        policy.stages.iter().map(Vec::len).sum::<usize>(),
        policy.stages.len(),
        policy.residual,
        policy.converged
    );
    println!(
        "value at b0: {:.4}, first action in mode {}: {}",
        policy.value(b0, first, 0)?,
        first,
        policy.action_at(b0, first, 0)?
    );
    if a.process == ProcessKind::Fixed {
        if let Ok(exact) = exact_value(&model, &reward, b0, &schedule.modes, reward.gamma) {
            println!("exact value at b0: {:.4}", exact.value);
        }
    }
    println!("policy: {}", a.out.display());
    Ok(())
}

fn simulate(a: SimulateArgs) -> CliResult<()> {
    let robot = load_model(&a.model)?;
    let truth = match &a.truth {
        Some(p) => load_model(p)?,
        None => robot.clone(),
    };
    if truth.n_states != robot.n_states {
        return Err(CliError::Validation(format!(
            "ground-truth model has {} states, robot model has {}",
            truth.n_states, robot.n_states
        )));
    }
    let reward = reward_for(&robot, &a.reward)?;
    let schedule = schedule_for(&a.schedule)?;
    let document = match &a.policy_file {
        Some(p) => Some(AlphaVectorPolicy::from_json_checked(&read_text(p)?, &robot)?),
        None => None,
    };
    let policies = a
        .policy
        .iter()
        .map(|&name| resolve_policy(name, &robot, &reward, Some(&schedule), document.clone()))
        .collect::<CliResult<Vec<_>>>()?;
    let report = compare_policies(
        &truth,
        &robot,
        &policies,
        &schedule.modes,
        &reward,
        &ScoreMap::from_reward(&reward),
        a.episodes,
        a.seed,
    )?;
    println!("{} episodes over {} rounds", report.n_episodes, report.modes.len());
    println!(
        "{:>10} {:>22} {:>22} {:>22}",
        "policy", "discounted return", "cumulative score", "help rate"
    );
    for p in &report.policies {
        let help = p
            .help_rate
            .as_ref()
            .map(|s| format!("{:.4} ± {:.4}", s.mean, s.ci95))
            .unwrap_or_else(|| "-".into());
        println!(
            "{:>10} {:>22} {:>22} {:>22}",
            p.policy,
            format!("{:.3} ± {:.3}", p.discounted_return.mean, p.discounted_return.ci95),
            format!("{:.3} ± {:.3}", p.cumulative_score.mean, p.cumulative_score.ci95),
            help
        );
    }
    if let Some(out) = &a.out {
        write_text(out, &to_json(&report))?;
    }
    if let Some(csv) = &a.csv {
        write_text(csv, &report.to_csv())?;
    }
    Ok(())
}

fn sweep(a: SweepArgs) -> CliResult<()> {
    let model = load_model(&a.model)?;
    let mut grid = SweepGrid::reference(a.scores.unwrap_or_else(|| default_scores(model.n_states)));
    if let Some(r) = a.r_values {
        grid.r_values = r;
    }
    if let Some(c) = a.costs {
        grid.cost_values = c;
    }
    let report = sensitivity_sweep(&model, &grid, a.gamma)?;
    print!("{}", report.render_table());
    if let Some(out) = &a.out {
        write_text(out, &to_json(&report))?;
    }
    if let Some(csv) = &a.csv {
        write_text(csv, &report.to_csv())?;
    }
    Ok(())
}

fn validate_files(a: ValidateArgs) -> CliResult<()> {
    if a.model.is_none() && a.data.is_none() {
        return Err(CliError::Usage("nothing to validate: pass --model and/or --data".into()));
    }
    let mut failures = Vec::new();
    let mut model = None;
    if let Some(path) = &a.model {
        let text = read_text(path)?;
        let params: ModelParams = serde_json::from_str(&text).map_err(|e| CliError::parse(path, e))?;
        let violations = validate(&params);
        for v in &violations {
            let tag = match v.severity {
                Severity::Error => "error",
                Severity::Warning => "warning",
            };
            println!("{}: {tag}: {}", path.display(), v.message);
        }
        let errors = violations.iter().filter(|v| v.severity == Severity::Error).count();
        if errors == 0 {
            println!("{}: ok ({} states, fingerprint {})", path.display(), params.n_states, params.fingerprint());
            model = Some(params);
        } else {
            failures.push(format!("{}: {errors} error(s)", path.display()));
        }
    }
    if let Some(path) = &a.data {
        match load_data(path, a.format) {
            Ok(set) => println!(
                "{}: ok ({} trajectories, {} events)",
                path.display(),
                set.len(),
                set.n_events()
            ),
            Err(CliError::Core(e)) => {
                println!("{}: error: {e}", path.display());
                failures.push(format!("{}: {e}", path.display()));
            }
            Err(e) => return Err(e),
        }
    }
    if let (Some(path), Some(params)) = (&a.policy_file, &model) {
        match AlphaVectorPolicy::from_json_checked(&read_text(path)?, params) {
            Ok(p) => println!("{}: ok ({} stage(s))", path.display(), p.stages.len()),
            Err(e) => {
                println!("{}: error: {e}", path.display());
                failures.push(format!("{}: {e}", path.display()));
            }
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(failures.join("; ")))
    }
}
