use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use mirrormdp::amdp::{round_policy, solve, AmdpProgram, AmdpSolution, AmdpTolerances};
use mirrormdp::estimation::{estimate_model, required_samples_constraint};
use mirrormdp::mdp::{estimate_mixing_time, optimal_gain_rvi, policy_value, Mdp, Policy, DEFAULT_T_MAX};
use mirrormdp::parallel::{run_parallel, CommStats, Execution};
use serde::Serialize;

use crate::config::{Auto, Mode, RunConfig};

pub const RVI_TOL: f64 = 1e-8;
pub const RVI_MAX_ITERS: usize = 10_000_000;

#[derive(Debug, Serialize)]
pub struct Summary {
    pub env: String,
    pub epsilon: f64,
    pub seed: u64,
    pub mode: Mode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    pub pre_samples_per_pair: u64,
    pub t_mix: f64,
    pub t_mix_estimated: bool,
    pub stepsize: f64,
    pub md_epsilon: f64,
    pub approx_level: f64,
    pub sigma: f64,
    /// Worst-case iteration count for the primal-dual guarantee.
    pub iterations_theoretical: u64,
    pub iterations_executed: usize,
    pub productive_steps: usize,
    pub nonproductive_steps: usize,
    pub v_bar_hat: f64,
    pub policy_value: f64,
    pub optimal_value: f64,
    pub gap: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comm: Option<CommStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solve_seconds: Option<f64>,
}

#[derive(Debug, Serialize)]
struct TraceRow {
    iter: usize,
    productive: u8,
    chosen_pair: Option<usize>,
    sample: Option<usize>,
    vbar: f64,
    max_constraint: f64,
    elapsed_ms: Option<f64>,
}

pub fn write_trace(path: &Path, solution: &AmdpSolution, timing: bool) -> Result<(), mirrormdp::Error> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    for rec in &solution.trace {
        w.serialize(TraceRow {
            iter: rec.k,
            productive: rec.productive as u8,
            chosen_pair: rec.chosen_pair,
            sample: rec.sample,
            vbar: rec.v_bar,
            max_constraint: rec.max_constraint,
            elapsed_ms: timing.then_some(rec.elapsed.as_secs_f64() * 1e3),
        })
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> mirrormdp::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => io.into(),
        other => mirrormdp::Error::InvalidArgument(format!("{other:?}")),
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), mirrormdp::Error> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn pre_samples(cfg: &RunConfig, mdp: &Mdp, box_radius: f64) -> Result<u64, mirrormdp::Error> {
    match cfg.pre_samples {
        Auto::Value(n) => Ok(n),
        Auto::Auto => {
            let tol = AmdpTolerances::for_target(cfg.epsilon);
            required_samples_constraint(
                mdp.num_states(),
                mdp.num_pairs(),
                cfg.sigma / 2.0,
                tol.approx_level,
                box_radius,
            )
        }
    }
}

/// Estimate, solve, round and evaluate.
pub fn solve_command(cfg: &RunConfig) -> Result<Summary, crate::CliError> {
    let mdp = cfg.env.load()?;
    if let (Mode::Parallel, Some(w)) = (cfg.mode, cfg.workers) {
        if w > mdp.num_pairs() {
            return Err(crate::CliError::Config(format!(
                "workers must not exceed the number of state-action pairs ({})",
                mdp.num_pairs()
            )));
        }
    }

    let (t_mix, t_mix_estimated) = match cfg.tmix {
        Auto::Value(t) => (t, false),
        Auto::Auto => {
            let t = estimate_mixing_time(&mdp, cfg.policies, DEFAULT_T_MAX, cfg.seed)?;
            eprintln!("estimated mixing time: {t}");
            (t as f64, true)
        }
    };
    let tol = AmdpTolerances::for_target(cfg.epsilon);
    let n = pre_samples(cfg, &mdp, 4.0 * t_mix)?;
    if cfg.pre_samples == Auto::Auto {
        eprintln!("preprocessing with {n} samples per pair");
    }
    let model = estimate_model(&mdp, n, cfg.seed, true)?;
    let program = AmdpProgram::new(mdp.clone(), model, t_mix, tol.approx_level)?;
    let solver_cfg = tol
        .solver_config(cfg.iterations, cfg.seed)
        .with_trace(cfg.trace.is_some())
        .with_confidence(cfg.sigma);

    let start = Instant::now();
    let (solution, comm, workers) = match cfg.mode {
        Mode::Sequential => (solve(&program, &solver_cfg)?, None, None),
        Mode::Parallel => {
            let workers = cfg.workers.unwrap_or(mdp.num_pairs());
            let out = run_parallel(&program, &solver_cfg, workers, Execution::Threads)?;
            (out.solution, Some(out.stats), Some(workers))
        }
    };
    let elapsed = start.elapsed();

    let policy = round_policy(&solution.duals, &mdp)?;
    let value = policy_value(&mdp, &policy)?;
    let optimal = optimal_gain_rvi(&mdp, RVI_TOL, RVI_MAX_ITERS)?.gain;

    if let Some(path) = &cfg.trace {
        write_trace(path, &solution, cfg.timing)?;
    }
    if let Some(path) = &cfg.policy {
        write_json(path, &policy)?;
    }

    let summary = Summary {
        env: cfg.env.to_string(),
        epsilon: cfg.epsilon,
        seed: cfg.seed,
        mode: cfg.mode,
        workers,
        pre_samples_per_pair: n,
        t_mix,
        t_mix_estimated,
        stepsize: tol.stepsize,
        md_epsilon: tol.md_epsilon,
        approx_level: tol.approx_level,
        sigma: cfg.sigma,
        iterations_theoretical: program.theoretical_iterations(cfg.sigma, tol.md_epsilon)?,
        iterations_executed: cfg.iterations,
        productive_steps: solution.productive_count,
        nonproductive_steps: solution.nonproductive_count,
        v_bar_hat: solution.x_hat.v_bar,
        policy_value: value,
        optimal_value: optimal,
        gap: optimal - value,
        comm,
        solve_seconds: cfg.timing.then_some(elapsed.as_secs_f64()),
    };
    if let Some(path) = &cfg.summary {
        write_json(path, &summary)?;
    }
    Ok(summary)
}

pub fn read_policy(path: &Path, mdp: &Mdp) -> Result<Policy, crate::CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| crate::CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let policy: Policy = serde_json::from_str(&text)
        .map_err(|e| crate::CliError::Config(format!("{}: {e}", path.display())))?;
    policy.validate(mdp).map_err(|e| crate::CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(policy)
}
