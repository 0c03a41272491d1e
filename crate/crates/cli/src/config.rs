//! Run configuration: a JSON file and command-line flags, flags winning.

use std::path::PathBuf;

use clap::Args;
use serde::Deserialize;

use crate::CliError;

pub const SEED_ENV: &str = "MARKOV_UQ_SEED";

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunArgs {
    /// JSON file with any of the options below (flags override it).
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Subcommand the config file was written for; checked when present.
    #[arg(skip)]
    pub command: Option<String>,
    /// Zoo string (e.g. `hypercube:d=3`), inline JSON or a JSON file.
    #[arg(long)]
    pub model: Option<String>,
    /// Alternative model: zoo string, JSON, `perturb:eps=0.1,seed=1`, `em` or `em-taylor`.
    #[arg(long = "alt-model")]
    pub alt_model: Option<String>,
    /// Observable: inline `{"values": [...]}`, a JSON file, or `1,2,3`.
    #[arg(long)]
    pub observable: Option<String>,
    /// auto | poincare | reversible | liapunov | log-sobolev | f-sobolev
    #[arg(long)]
    pub method: Option<String>,
    /// Relative-entropy budget; excludes --alt-model.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Time horizon.
    #[arg(long = "T")]
    #[serde(rename = "T")]
    pub horizon: Option<f64>,
    /// Euler–Maruyama step.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Number of Monte Carlo paths.
    #[arg(long)]
    pub paths: Option<usize>,
    /// Master seed (falls back to MARKOV_UQ_SEED, then 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker thread cap.
    #[arg(long)]
    pub threads: Option<usize>,
    /// JSON report path (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV output path.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// CSV sweep variable for `bound`: `eta` or `T`.
    #[arg(long)]
    pub sweep: Option<String>,
    /// Sweep grid `lo:hi:points`, log-spaced.
    #[arg(long)]
    pub grid: Option<String>,
}

macro_rules! take {
    ($dst:ident, $src:ident, $($f:ident),*) => {
        $( if $dst.$f.is_none() { $dst.$f = $src.$f; } )*
    };
}

impl RunArgs {
    /// Merges the config file under the flags and resolves the seed fallback.
    pub fn resolve(mut self, command: &str) -> Result<Self, CliError> {
        if let Some(path) = self.config.clone() {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
            let file: RunArgs = serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("malformed config {}: {e}", path.display())))?;
            if let Some(c) = &file.command {
                if c != command {
                    return Err(CliError::Usage(format!(
                        "config is for command \"{c}\", not \"{command}\""
                    )));
                }
            }
            take!(
                self, file, model, alt_model, observable, method, eta, horizon, dt, paths, seed, threads, out,
                csv, sweep, grid
            );
        }
        if self.seed.is_none() {
            if let Ok(s) = std::env::var(SEED_ENV) {
                let seed = s
                    .trim()
                    .parse()
                    .map_err(|_| CliError::Usage(format!("{SEED_ENV}={s} is not an unsigned integer")))?;
                self.seed = Some(seed);
            }
        }
        if self.eta.is_some() && self.alt_model.is_some() {
            return Err(CliError::Usage("--eta and --alt-model are mutually exclusive".into()));
        }
        Ok(self)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn model(&self) -> Result<&str, CliError> {
        self.model
            .as_deref()
            .ok_or_else(|| CliError::Usage("--model is required".into()))
    }
}
