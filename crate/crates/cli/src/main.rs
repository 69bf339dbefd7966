use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mirrormdp::mdp::{estimate_mixing_time, optimal_gain_rvi, policy_value, DEFAULT_T_MAX};
use serde_json::json;

mod config;
mod run;

use config::{Auto, ConfigError, EnvSpec, FileConfig, Mode, RunConfig};

/// Stochastic mirror descent for average-reward MDPs.
#[derive(Debug, Parser)]
#[command(name = "mirrormdp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate a model, run the solver and evaluate the rounded policy.
    Solve(Box<SolveArgs>),
    /// Optimal average reward by relative value iteration.
    Optimal {
        #[arg(long)]
        env: EnvSpec,
    },
    /// Average reward of a policy given as JSON.
    Eval {
        #[arg(long)]
        env: EnvSpec,
        #[arg(long)]
        policy: PathBuf,
    },
    /// Largest mixing time over random policies.
    MixingTime {
        #[arg(long)]
        env: EnvSpec,
        #[arg(long, default_value_t = config::DEFAULT_POLICIES)]
        policies: usize,
        /// Defaults to $MIRRORMDP_SEED, then 0.
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// TOML file with the same keys as the flags; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// riverswim, access-control or json:<path>
    #[arg(long)]
    env: Option<EnvSpec>,
    /// Target accuracy of the returned policy.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    /// Samples per state-action pair for the model, or "auto".
    #[arg(long)]
    pre_samples: Option<Auto<u64>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Worker count in parallel mode; defaults to one per pair.
    #[arg(long)]
    workers: Option<usize>,
    /// Mixing-time bound, or "auto" to estimate it from random policies.
    #[arg(long)]
    tmix: Option<Auto<f64>>,
    /// Random policies used by --tmix auto.
    #[arg(long)]
    policies: Option<usize>,
    /// Failure probability used for sample and iteration bounds.
    #[arg(long)]
    sigma: Option<f64>,
    /// Write the per-iteration trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the rounded policy as JSON.
    #[arg(long)]
    policy: Option<PathBuf>,
    /// Write the run summary as JSON.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Record wall-clock times in the trace and summary.
    #[arg(long)]
    timing: bool,
}

impl SolveArgs {
    fn into_parts(self) -> (Option<PathBuf>, FileConfig) {
        let flags = FileConfig {
            env: self.env,
            epsilon: self.epsilon,
            iters: self.iters,
            pre_samples: self.pre_samples,
            seed: self.seed,
            mode: self.mode,
            workers: self.workers,
            tmix: self.tmix,
            policies: self.policies,
            sigma: self.sigma,
            trace: self.trace,
            policy: self.policy,
            summary: self.summary,
            timing: self.timing.then_some(true),
        };
        (self.config, flags)
    }
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Run(mirrormdp::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Run(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Run(e) => write!(f, "{e}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

impl From<mirrormdp::Error> for CliError {
    fn from(e: mirrormdp::Error) -> Self {
        CliError::Run(e)
    }
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("json values serialize"));
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Solve(args) => {
            let (config_path, flags) = args.into_parts();
            let file = match config_path {
                Some(path) => FileConfig::read(&path)?,
                None => FileConfig::default(),
            };
            let cfg = RunConfig::resolve(flags, file)?;
            let summary = run::solve_command(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&summary).map_err(mirrormdp::Error::from)?);
        }
        Command::Optimal { env } => {
            let mdp = env.load()?;
            let rvi = optimal_gain_rvi(&mdp, run::RVI_TOL, run::RVI_MAX_ITERS)?;
            print_json(&json!({
                "env": env.to_string(),
                "optimal_value": rvi.gain,
                "bellman_residual": rvi.bellman_residual,
                "iterations": rvi.iterations,
                "policy": rvi.policy,
            }));
        }
        Command::Eval { env, policy } => {
            let mdp = env.load()?;
            let policy = run::read_policy(&policy, &mdp)?;
            let value = policy_value(&mdp, &policy)?;
            print_json(&json!({ "env": env.to_string(), "policy_value": value }));
        }
        Command::MixingTime { env, policies, seed } => {
            if policies == 0 {
                return Err(CliError::Config("policies must be positive".into()));
            }
            let seed = match seed {
                Some(s) => s,
                None => config::seed_from_env()?.unwrap_or(0),
            };
            let mdp = env.load()?;
            let t_mix = estimate_mixing_time(&mdp, policies, DEFAULT_T_MAX, seed)?;
            print_json(&json!({
                "env": env.to_string(),
                "policies": policies,
                "seed": seed,
                "t_mix": t_mix,
            }));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mirrormdp: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
