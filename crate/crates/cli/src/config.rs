//! Run configuration file.
//!
//! ```yaml
//! benchmarks_file: benchmarks.yaml
//! backend:
//!   scripted: scripts        # or: live: {endpoint: https://..., model: some-model}
//! constraints_enabled: true
//! validator_enabled: true
//! n_trials: 10
//! max_cycles: 5
//! fuzz_duration_s: 300
//! prices_file: prices.yaml   # optional
//! output_dir: out
//! set_name: Set-1            # optional label for reports
//! parallel: 4                # optional, concurrent trials
//! ```
//!
//! Relative paths resolve against the directory holding the config file.
//! Live credentials are never read from here; see `FUZZGATE_API_KEY`.

use std::fs;
use std::path::{Path, PathBuf};

use fuzzgate_core::pipeline::{DEFAULT_MAX_CYCLES, DEFAULT_N_TRIALS};
use fuzzgate_core::executor::DEFAULT_FUZZ_DURATION_S;
use fuzzgate_core::PromptVariant;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendConfig {
    /// Directory of script bundles, or a single bundle file.
    Scripted(PathBuf),
    Live { endpoint: String, model: String },
}

fn yes() -> bool {
    true
}

fn default_trials() -> usize {
    DEFAULT_N_TRIALS
}

fn default_cycles() -> u32 {
    DEFAULT_MAX_CYCLES
}

fn default_duration() -> f64 {
    DEFAULT_FUZZ_DURATION_S
}

fn default_parallel() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub benchmarks_file: PathBuf,
    #[serde(with = "serde_yaml::with::singleton_map")]
    pub backend: BackendConfig,
    #[serde(default = "yes")]
    pub constraints_enabled: bool,
    #[serde(default = "yes")]
    pub validator_enabled: bool,
    #[serde(default = "default_trials")]
    pub n_trials: usize,
    #[serde(default = "default_cycles")]
    pub max_cycles: u32,
    #[serde(default = "default_duration")]
    pub fuzz_duration_s: f64,
    #[serde(default)]
    pub prices_file: Option<PathBuf>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub set_name: Option<String>,
    #[serde(default = "default_parallel")]
    pub parallel: usize,
    #[serde(default)]
    pub prompt_variant: PromptVariant,
}

impl RunConfig {
    pub fn parse(text: &str, base: &Path) -> Result<Self, CliError> {
        let mut cfg: RunConfig =
            serde_yaml::from_str(text).map_err(|e| CliError::input(format!("run config: {e}")))?;
        cfg.benchmarks_file = base.join(&cfg.benchmarks_file);
        cfg.output_dir = base.join(&cfg.output_dir);
        cfg.prices_file = cfg.prices_file.map(|p| base.join(p));
        if let BackendConfig::Scripted(p) = &mut cfg.backend {
            *p = base.join(&*p);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.n_trials < 1 {
            return Err(CliError::input("n_trials must be at least 1"));
        }
        if self.max_cycles < 1 {
            return Err(CliError::input("max_cycles must be at least 1"));
        }
        if self.parallel < 1 {
            return Err(CliError::input("parallel must be at least 1"));
        }
        if !(self.fuzz_duration_s >= 0.0) {
            return Err(CliError::input("fuzz_duration_s must be non-negative"));
        }
        Ok(())
    }

    /// Label used in report tables.
    pub fn set_label(&self) -> String {
        self.set_name.clone().unwrap_or_else(|| {
            self.benchmarks_file
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "run".into())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_paths() {
        let c = RunConfig::parse(
            "benchmarks_file: b.yaml\nbackend: {scripted: s}\noutput_dir: out\n",
            Path::new("/cfg"),
        )
        .unwrap();
        assert_eq!(c.n_trials, 10);
        assert_eq!(c.max_cycles, 5);
        assert_eq!(c.fuzz_duration_s, 300.0);
        assert!(c.constraints_enabled && c.validator_enabled);
        assert_eq!(c.backend, BackendConfig::Scripted("/cfg/s".into()));
        assert_eq!(c.set_label(), "b");
    }

    #[test]
    fn exactly_one_backend() {
        let two = "benchmarks_file: b\noutput_dir: o\nbackend: {scripted: s, live: {endpoint: e, model: m}}\n";
        assert!(RunConfig::parse(two, Path::new(".")).is_err());
        let none = "benchmarks_file: b\noutput_dir: o\n";
        assert!(RunConfig::parse(none, Path::new(".")).is_err());
        let zero = "benchmarks_file: b\noutput_dir: o\nbackend: {scripted: s}\nn_trials: 0\n";
        assert!(RunConfig::parse(zero, Path::new(".")).is_err());
    }
}
