//! Experiment configuration: a flat JSON object, overridden by command-line
//! flags, validated once before anything runs.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use solitonforge::glue::WeightSpec;
use solitonforge::grid::DEFAULT_H;

use crate::ConfigError;

/// The experiments the front door can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Cao,
    Ale,
    Glue,
    ErrorScan,
    InvertScan,
    Newton,
    VerifyAll,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Cao,
        Command::Ale,
        Command::Glue,
        Command::ErrorScan,
        Command::InvertScan,
        Command::Newton,
        Command::VerifyAll,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Cao => "cao",
            Command::Ale => "ale",
            Command::Glue => "glue",
            Command::ErrorScan => "error-scan",
            Command::InvertScan => "invert-scan",
            Command::Newton => "newton",
            Command::VerifyAll => "verify-all",
        }
    }

    /// Commands that build glued data and therefore need a valid weight.
    fn needs_weights(self) -> bool {
        matches!(self, Command::Glue | Command::ErrorScan | Command::InvertScan | Command::Newton)
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| ConfigError::Invalid(format!("unknown command `{s}`")))
    }
}

/// Keys accepted in a config file. Every key is optional; unknown keys are
/// rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub command: Option<Command>,
    pub n: Option<u32>,
    pub a: Option<f64>,
    pub gamma: Option<f64>,
    pub delta: Option<f64>,
    pub eps: Option<f64>,
    pub eps_list: Option<Vec<f64>>,
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    pub h: Option<f64>,
    pub seed: Option<u64>,
    pub newton_tol: Option<f64>,
    pub samples: Option<usize>,
}

impl ConfigFile {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_json(&text)
    }

    /// Keys set in `other` win.
    pub fn overlay(mut self, other: ConfigFile) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(command, n, a, gamma, delta, eps, eps_list, t_min, t_max, h, seed, newton_tol, samples);
        self
    }
}

/// A fully resolved, validated experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    pub n: u32,
    pub a: f64,
    pub gamma: f64,
    pub delta: f64,
    pub eps: f64,
    pub eps_list: Vec<f64>,
    pub t_min: f64,
    pub t_max: f64,
    pub h: f64,
    pub seed: u64,
    pub newton_tol: f64,
    pub samples: usize,
}

/// Largest profile grid a config may ask for.
pub const MAX_NODES: usize = 1 << 24;

/// Sweep used by `error-scan` and `invert-scan` when none is given.
pub const DEFAULT_EPS_LIST: [f64; 5] = [1e-2, 3e-3, 1e-3, 3e-4, 1e-4];

impl ExperimentConfig {
    /// Fills defaults for `command` and validates.
    pub fn resolve(command: Command, file: ConfigFile) -> Result<Self, ConfigError> {
        if let Some(c) = file.command {
            if c != command {
                return Err(ConfigError::Invalid(format!("config file is for `{c}` but `{command}` was requested")));
            }
        }
        let (t_min, t_max) = match command {
            Command::Ale => (-10.0, 10.0),
            _ => (-20.0, 40.0),
        };
        let cfg = ExperimentConfig {
            command,
            n: file.n.unwrap_or(2),
            a: file.a.unwrap_or(0.0),
            gamma: file.gamma.unwrap_or(1.0),
            delta: file.delta.unwrap_or(0.5),
            eps: file.eps.unwrap_or(1e-3),
            eps_list: file.eps_list.unwrap_or_else(|| DEFAULT_EPS_LIST.to_vec()),
            t_min: file.t_min.unwrap_or(t_min),
            t_max: file.t_max.unwrap_or(t_max),
            h: file.h.unwrap_or(DEFAULT_H),
            seed: file.seed.unwrap_or(42),
            newton_tol: file.newton_tol.unwrap_or(1e-10),
            samples: file.samples.unwrap_or(64),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.n < 1 || self.n > 8 {
            return bad(format!("n = {} must lie in 1..=8", self.n));
        }
        if !(self.a >= 0.0 && self.a.is_finite()) {
            return bad(format!("a = {} must be finite and nonnegative", self.a));
        }
        if !(self.h > 0.0 && self.h <= 0.5) {
            return bad(format!("h = {} must lie in (0, 0.5]", self.h));
        }
        if !(self.t_min.is_finite() && self.t_max.is_finite() && self.t_min < self.t_max) {
            return bad(format!("grid [{}, {}] is empty", self.t_min, self.t_max));
        }
        let nodes = (self.t_max - self.t_min) / self.h;
        if nodes > MAX_NODES as f64 {
            return bad(format!("grid needs {nodes:.3e} nodes, more than {MAX_NODES}"));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return bad(format!("eps = {} must lie in (0, 1)", self.eps));
        }
        if self.eps_list.is_empty() {
            return bad("eps_list is empty".into());
        }
        if let Some(e) = self.eps_list.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
            return bad(format!("eps_list entry {e} must lie in (0, 1)"));
        }
        if !(self.newton_tol > 0.0 && self.newton_tol < 1.0) {
            return bad(format!("newton_tol = {} must lie in (0, 1)", self.newton_tol));
        }
        if self.samples == 0 {
            return bad("samples must be positive".into());
        }
        if self.command != Command::Cao && self.command != Command::VerifyAll && self.n < 2 {
            return bad(format!("`{}` needs n >= 2, got {}", self.command, self.n));
        }
        if self.command.needs_weights() {
            self.weight_spec()?;
        }
        Ok(())
    }

    pub fn weight_spec(&self) -> Result<WeightSpec, ConfigError> {
        WeightSpec::new(self.n, self.gamma, self.delta).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// The config as a file that reproduces this run.
    pub fn to_file(&self) -> ConfigFile {
        ConfigFile {
            command: Some(self.command),
            n: Some(self.n),
            a: Some(self.a),
            gamma: Some(self.gamma),
            delta: Some(self.delta),
            eps: Some(self.eps),
            eps_list: Some(self.eps_list.clone()),
            t_min: Some(self.t_min),
            t_max: Some(self.t_max),
            h: Some(self.h),
            seed: Some(self.seed),
            newton_tol: Some(self.newton_tol),
            samples: Some(self.samples),
        }
    }
}
