use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mirrormdp::mdp::{access_control, river_swim, AccessControlParams, Mdp};
use serde::{Deserialize, Serialize};

pub const SEED_VAR: &str = "MIRRORMDP_SEED";

pub const DEFAULT_EPSILON: f64 = 0.05;
pub const DEFAULT_ITERATIONS: usize = 200_000;
pub const DEFAULT_PRE_SAMPLES: u64 = 1000;
pub const DEFAULT_POLICIES: usize = 1000;
pub const DEFAULT_SIGMA: f64 = 0.1;

/// Failure to turn flags, config files and environment into a run.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

macro_rules! config_err {
    ($($arg:tt)*) => { ConfigError(format!($($arg)*)) };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum EnvSpec {
    RiverSwim,
    AccessControl,
    Json(PathBuf),
}

impl FromStr for EnvSpec {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "riverswim" => Ok(EnvSpec::RiverSwim),
            "access-control" => Ok(EnvSpec::AccessControl),
            _ => match s.strip_prefix("json:") {
                Some(path) if !path.is_empty() => Ok(EnvSpec::Json(PathBuf::from(path))),
                _ => Err(config_err!("unknown environment {s:?} (expected riverswim, access-control or json:<path>)")),
            },
        }
    }
}

impl TryFrom<String> for EnvSpec {
    type Error = ConfigError;

    fn try_from(s: String) -> Result<Self, ConfigError> {
        s.parse()
    }
}

impl From<EnvSpec> for String {
    fn from(env: EnvSpec) -> String {
        env.to_string()
    }
}

impl fmt::Display for EnvSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnvSpec::RiverSwim => f.write_str("riverswim"),
            EnvSpec::AccessControl => f.write_str("access-control"),
            EnvSpec::Json(path) => write!(f, "json:{}", path.display()),
        }
    }
}

impl EnvSpec {
    pub fn load(&self) -> Result<Mdp, ConfigError> {
        match self {
            EnvSpec::RiverSwim => Ok(river_swim()),
            EnvSpec::AccessControl => Ok(access_control(&AccessControlParams::default())),
            EnvSpec::Json(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| config_err!("cannot read {}: {e}", path.display()))?;
                Mdp::from_json(&text).map_err(|e| config_err!("{}: {e}", path.display()))
            }
        }
    }
}

/// A count given explicitly or derived automatically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Auto<T> {
    Value(T),
    Auto,
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for Auto<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw<T> {
            Value(T),
            Keyword(String),
        }
        match Raw::deserialize(d)? {
            Raw::Value(v) => Ok(Auto::Value(v)),
            Raw::Keyword(s) if s == "auto" => Ok(Auto::Auto),
            Raw::Keyword(s) => Err(serde::de::Error::custom(format!("expected a number or \"auto\", got {s:?}"))),
        }
    }
}

impl<T: fmt::Display> fmt::Display for Auto<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Auto::Value(v) => v.fmt(f),
            Auto::Auto => f.write_str("auto"),
        }
    }
}

impl<T: FromStr> FromStr for Auto<T> {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(Auto::Auto);
        }
        s.parse().map(Auto::Value).map_err(|_| format!("expected a number or \"auto\", got {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Sequential,
    Parallel,
}

/// Keys accepted in a TOML config file; the same names as the flags.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub env: Option<EnvSpec>,
    pub epsilon: Option<f64>,
    pub iters: Option<usize>,
    pub pre_samples: Option<Auto<u64>>,
    pub seed: Option<u64>,
    pub mode: Option<Mode>,
    pub workers: Option<usize>,
    pub tmix: Option<Auto<f64>>,
    pub policies: Option<usize>,
    pub sigma: Option<f64>,
    pub trace: Option<PathBuf>,
    pub policy: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub timing: Option<bool>,
}

impl FileConfig {
    pub fn read(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| config_err!("cannot read {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| config_err!("{}: {e}", path.display()))
    }
}

/// Fully resolved settings of a `solve` run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub env: EnvSpec,
    pub epsilon: f64,
    pub iterations: usize,
    pub pre_samples: Auto<u64>,
    pub seed: u64,
    pub mode: Mode,
    pub workers: Option<usize>,
    pub tmix: Auto<f64>,
    pub policies: usize,
    pub sigma: f64,
    pub trace: Option<PathBuf>,
    pub policy: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub timing: bool,
}

/// Seed from `MIRRORMDP_SEED`, if set.
pub fn seed_from_env() -> Result<Option<u64>, ConfigError> {
    match std::env::var(SEED_VAR) {
        Ok(s) => s.trim().parse().map(Some).map_err(|_| config_err!("{SEED_VAR}={s:?} is not an unsigned integer")),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(config_err!("{SEED_VAR}: {e}")),
    }
}

impl RunConfig {
    /// Flags take precedence over the config file, which takes precedence
    /// over the environment and the built-in defaults.
    pub fn resolve(flags: FileConfig, file: FileConfig) -> Result<Self, ConfigError> {
        let seed = match flags.seed.or(file.seed) {
            Some(s) => s,
            None => seed_from_env()?.unwrap_or(0),
        };
        let cfg = RunConfig {
            env: flags.env.or(file.env).ok_or_else(|| config_err!("no environment given (use --env)"))?,
            epsilon: flags.epsilon.or(file.epsilon).unwrap_or(DEFAULT_EPSILON),
            iterations: flags.iters.or(file.iters).unwrap_or(DEFAULT_ITERATIONS),
            pre_samples: flags.pre_samples.or(file.pre_samples).unwrap_or(Auto::Value(DEFAULT_PRE_SAMPLES)),
            seed,
            mode: flags.mode.or(file.mode).unwrap_or(Mode::Sequential),
            workers: flags.workers.or(file.workers),
            tmix: flags.tmix.or(file.tmix).unwrap_or(Auto::Auto),
            policies: flags.policies.or(file.policies).unwrap_or(DEFAULT_POLICIES),
            sigma: flags.sigma.or(file.sigma).unwrap_or(DEFAULT_SIGMA),
            trace: flags.trace.or(file.trace),
            policy: flags.policy.or(file.policy),
            summary: flags.summary.or(file.summary),
            timing: flags.timing.or(file.timing).unwrap_or(false),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(config_err!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.iterations == 0 {
            return Err(config_err!("iters must be positive"));
        }
        if self.pre_samples == Auto::Value(0) {
            return Err(config_err!("pre-samples must be positive"));
        }
        if let Auto::Value(t) = self.tmix {
            if !(t > 0.0 && t.is_finite()) {
                return Err(config_err!("tmix must be positive, got {t}"));
            }
        }
        if self.policies == 0 {
            return Err(config_err!("policies must be positive"));
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(config_err!("sigma must lie in (0, 1), got {}", self.sigma));
        }
        match (self.mode, self.workers) {
            (_, Some(0)) => Err(config_err!("workers must be positive")),
            (Mode::Sequential, Some(_)) => Err(config_err!("--workers requires --mode parallel")),
            _ => Ok(()),
        }
    }
}
