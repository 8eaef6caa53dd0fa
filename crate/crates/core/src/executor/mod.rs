//! Building and fuzzing drivers. The simulated executor answers from an
//! ordered rule file; the external executor shells out to a project's own
//! build and fuzz commands.

mod external;
mod sanitizer;
mod simulated;

use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analyzers::CrashReport;

pub use external::ExternalBuild;
pub use sanitizer::{parse_sanitizer_report, UNKNOWN_FUNCTION};
pub use simulated::{Predicate, SimOutcome, SimRule, SimulatedProject};

pub const DRIVER_ENTRY: &str = "LLVMFuzzerTestOneInput";
pub const DEFAULT_FUZZ_DURATION_S: f64 = 300.0;

#[derive(Debug, Error)]
pub enum ExecutorError {
    #[error("driver failed to build: {0}")]
    BuildFailure(String),
    #[error("fuzzing exceeded its {0:?} wall-clock cap")]
    ExecutorTimeout(Duration),
    #[error("no sanitizer ERROR block found")]
    NoCrashFound,
    #[error("executor configuration: {0}")]
    Config(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl ExecutorError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        ExecutorError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuzzDriver {
    pub source: String,
    pub entry_symbol: String,
    /// 1 for the first draft, +1 per revision.
    pub revision: u32,
    pub build_ok: bool,
}

impl FuzzDriver {
    pub fn new(source: impl Into<String>, revision: u32) -> Self {
        Self {
            source: source.into(),
            entry_symbol: DRIVER_ENTRY.to_string(),
            revision,
            build_ok: false,
        }
    }

    pub fn has_entry(&self) -> bool {
        self.source.contains(&self.entry_symbol)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub built: bool,
    pub crashed: bool,
    pub crash: Option<CrashReport>,
    /// Project line coverage in [0, 1].
    pub coverage: f64,
    pub duration_s: f64,
}

/// Rejects drivers that cannot possibly build.
pub(crate) fn precheck(driver: &FuzzDriver) -> Result<(), ExecutorError> {
    if driver.source.trim().is_empty() {
        return Err(ExecutorError::BuildFailure("empty driver source".into()));
    }
    if !driver.has_entry() {
        return Err(ExecutorError::BuildFailure(format!(
            "driver does not define {}",
            driver.entry_symbol
        )));
    }
    Ok(())
}

pub trait Executor: Send + Sync {
    /// Builds and fuzzes `driver` for `duration_s` seconds. `work_dir` is a
    /// scratch directory private to the calling trial.
    fn execute(
        &self,
        driver: &FuzzDriver,
        duration_s: f64,
        work_dir: &Path,
    ) -> Result<ExecutionResult, ExecutorError>;
}
