//! Experiment specification: a versioned JSON document, optionally
//! overridden field by field from the command line.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sln_gbm::Scheme;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Simulate,
    Moments,
    Qvcheck,
    Nontight,
    Pde,
    Report,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Moments => "moments",
            Command::Qvcheck => "qvcheck",
            Command::Nontight => "nontight",
            Command::Pde => "pde",
            Command::Report => "report",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    #[default]
    Both,
}

/// Every field but `schema_version` and `command` may be omitted and then
/// takes a per-command default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub schema_version: u32,
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    /// Checkpoint times for `simulate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<f64>>,
    /// Horizons for `nontight` and `pde`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_stars: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    /// Increment count for `qvcheck`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Scheme>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    /// Report file read by `report`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn new(command: Command) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command,
            n: None,
            p: None,
            tau: None,
            checkpoints: None,
            tau_stars: None,
            dt: None,
            paths: None,
            samples: None,
            seed: None,
            scheme: None,
            out: None,
            format: None,
            input: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let spec: Self = serde_json::from_str(text).map_err(|e| CliError::Schema(e.to_string()))?;
        if spec.schema_version != SCHEMA_VERSION {
            return Err(CliError::Schema(format!(
                "schema_version {} not supported (expected {SCHEMA_VERSION})",
                spec.schema_version
            )));
        }
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
        Self::from_json(&text)
    }

    /// Fills unset fields with the defaults of `self.command`.
    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let n = self.n.unwrap_or(3);
        let tau = self.tau.unwrap_or(match self.command {
            Command::Nontight | Command::Pde => 20.0,
            _ => 1.0,
        });
        let tau_stars = self.tau_stars.clone().unwrap_or_else(|| vec![tau]);
        let horizon = match self.command {
            Command::Nontight | Command::Pde => tau_stars.iter().copied().fold(0.0, f64::max),
            _ => tau,
        };
        let dt = self.dt.unwrap_or(if horizon <= 2.0 { 1e-3 } else { 1e-2 });
        let resolved = Resolved {
            command: self.command,
            n,
            p: self.p.unwrap_or(2),
            tau,
            checkpoints: self.checkpoints.clone().unwrap_or_else(|| vec![tau]),
            tau_stars,
            dt,
            paths: self.paths.unwrap_or(10_000),
            samples: self.samples.unwrap_or(100_000),
            seed: self.seed.unwrap_or(1),
            scheme: self.scheme.unwrap_or_default(),
            out: self.out.clone().unwrap_or_else(|| PathBuf::from("out")),
            format: self.format.unwrap_or_default(),
            input: self.input.clone(),
        };
        if resolved.command == Command::Report && resolved.input.is_none() {
            return Err(CliError::Schema("report needs an input file".into()));
        }
        Ok(resolved)
    }
}

/// A specification with every default applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolved {
    pub command: Command,
    pub n: usize,
    pub p: u32,
    pub tau: f64,
    pub checkpoints: Vec<f64>,
    pub tau_stars: Vec<f64>,
    pub dt: f64,
    pub paths: usize,
    pub samples: usize,
    pub seed: u64,
    pub scheme: Scheme,
    pub out: PathBuf,
    pub format: Format,
    pub input: Option<PathBuf>,
}
