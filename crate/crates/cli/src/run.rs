//! `fuzzgate run`: every benchmark of a set through the full pipeline.
//!
//! Output directory layout:
//!
//! ```text
//! run.json                        configuration and per-trial outcomes
//! results/<bench>/<trial>/state.json
//! bundles/<bench>/<trial>/cycle-<n>/<agent>[.attempt-<k>].bundle.json
//! repository/<bench>/...          artifacts the stages exchanged
//! work/<bench>/<trial>/cycle-<n>/ executor scratch space
//! report.txt, sets.csv, validation.csv, satisfaction.csv, costs.csv
//! ```

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use fuzzgate_core::pipeline::{
    load_benchmarks, run_benchmark, FunctionAnalysis, PipelineConfig, PreparedBenchmark, RunLayout, TrialEnv,
};
use fuzzgate_core::toolbox::ToolLimits;
use fuzzgate_core::{LiveBackend, LlmBackend, SharedRepository, Termination, Toolbox, TrialState};
use serde::{Deserialize, Serialize};

use crate::config::{BackendConfig, RunConfig};
use crate::report::{load_prices, render_runs, write_report};
use crate::{emit, scripted_backend, write_file, CliError, RunArgs, EXIT_AGENT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialBrief {
    pub trial_id: String,
    pub termination: Termination,
    pub cycles: u32,
    pub crashes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl TrialBrief {
    fn of(t: &TrialState) -> Self {
        Self {
            trial_id: t.trial_id.clone(),
            termination: t.termination,
            cycles: t.cycle,
            crashes: t.crash_history.len(),
            failure: t.failure.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkEntry {
    pub id: String,
    #[serde(default)]
    pub function_analysis: Option<FunctionAnalysis>,
    pub trials: Vec<TrialBrief>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureEntry {
    pub benchmark: String,
    pub error: String,
}

/// Contents of `run.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub set: String,
    pub constraints_enabled: bool,
    pub validator_enabled: bool,
    pub n_trials: usize,
    pub max_cycles: u32,
    pub fuzz_duration_s: f64,
    /// False while the run is in progress or when it was interrupted.
    pub complete: bool,
    pub benchmarks: Vec<BenchmarkEntry>,
    pub failures: Vec<FailureEntry>,
}

impl RunSummary {
    pub fn load(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join("run.json");
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::io(&path, e))
    }

    fn save(&self, dir: &Path) -> Result<(), CliError> {
        let mut json = serde_json::to_string_pretty(self).expect("summary serializes");
        json.push('\n');
        write_file(&dir.join("run.json"), &json)
    }
}

pub fn apply_overrides(cfg: &mut RunConfig, a: &RunArgs) -> Result<(), CliError> {
    if let Some(s) = a.constraints {
        cfg.constraints_enabled = s.enabled();
    }
    if let Some(s) = a.validator {
        cfg.validator_enabled = s.enabled();
    }
    if let Some(p) = a.parallel {
        cfg.parallel = p;
    }
    if let Some(n) = a.n_trials {
        cfg.n_trials = n;
    }
    if let Some(m) = a.max_cycles {
        cfg.max_cycles = m;
    }
    if let Some(d) = a.duration {
        cfg.fuzz_duration_s = d;
    }
    if let Some(p) = &a.prices {
        cfg.prices_file = Some(p.clone());
    }
    if let Some(o) = &a.output {
        cfg.output_dir = o.clone();
    }
    if let Some(s) = &a.set_name {
        cfg.set_name = Some(s.clone());
    }
    cfg.validate().map_err(|e| CliError::usage(e.message))
}

fn backend(cfg: &RunConfig) -> Result<Box<dyn LlmBackend>, CliError> {
    match &cfg.backend {
        BackendConfig::Scripted(p) => scripted_backend(p),
        BackendConfig::Live { endpoint, model } => Ok(Box::new(LiveBackend::new(endpoint, model))),
    }
}

fn pipeline_config(cfg: &RunConfig) -> PipelineConfig {
    PipelineConfig {
        max_cycles: cfg.max_cycles,
        constraints_enabled: cfg.constraints_enabled,
        validator_enabled: cfg.validator_enabled,
        fuzz_duration_s: cfg.fuzz_duration_s,
        prompt_variant: cfg.prompt_variant,
        ..PipelineConfig::default()
    }
}

/// Runs every benchmark of the configuration. A benchmark that cannot be
/// opened or run is recorded in `failures` and the rest still run.
pub fn execute_run(cfg: &RunConfig) -> Result<RunSummary, CliError> {
    let specs = load_benchmarks(&cfg.benchmarks_file)?;
    let backend = backend(cfg)?;
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| CliError::io(&cfg.output_dir, e))?;
    let layout = RunLayout::new(&cfg.output_dir);
    let repo = SharedRepository::open(layout.repository()).map_err(|e| CliError::input(e.to_string()))?;
    let config = pipeline_config(cfg);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallel)
        .build()
        .map_err(|e| CliError::input(format!("cannot start worker threads: {e}")))?;

    let mut summary = RunSummary {
        set: cfg.set_label(),
        constraints_enabled: cfg.constraints_enabled,
        validator_enabled: cfg.validator_enabled,
        n_trials: cfg.n_trials,
        max_cycles: cfg.max_cycles,
        fuzz_duration_s: cfg.fuzz_duration_s,
        complete: false,
        benchmarks: Vec::new(),
        failures: Vec::new(),
    };
    summary.save(&cfg.output_dir)?;

    for spec in specs {
        let id = spec.id.clone();
        let prepared = match PreparedBenchmark::open(spec) {
            Ok(p) => p,
            Err(e) => {
                tracing::error!(benchmark = %id, error = %e, "benchmark skipped");
                summary.failures.push(FailureEntry { benchmark: id, error: e.to_string() });
                continue;
            }
        };
        let executor = match prepared.executor() {
            Ok(x) => x,
            Err(e) => {
                summary.failures.push(FailureEntry { benchmark: id, error: e.to_string() });
                continue;
            }
        };
        let tools = Toolbox::new(prepared.checkout.clone(), Arc::clone(&prepared.index), ToolLimits::default());
        let env = TrialEnv {
            checkout: &prepared.checkout,
            index: &prepared.index,
            tools: &tools,
            backend: backend.as_ref(),
            executor: executor.as_ref(),
            repo: &repo,
            layout: &layout,
        };
        match pool.install(|| run_benchmark(&prepared.function, cfg.n_trials, &config, &env)) {
            Ok(run) => summary.benchmarks.push(BenchmarkEntry {
                id,
                function_analysis: run.function_analysis,
                trials: run.trials.iter().map(TrialBrief::of).collect(),
            }),
            Err(e) => summary.failures.push(FailureEntry { benchmark: id, error: e.to_string() }),
        }
        summary.save(&cfg.output_dir)?;
    }
    summary.complete = true;
    summary.save(&cfg.output_dir)?;
    Ok(summary)
}

pub fn cmd_run(a: &RunArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(&a.config)?;
    apply_overrides(&mut cfg, a)?;
    let prices = cfg.prices_file.as_deref().map(load_prices).transpose()?;
    let summary = execute_run(&cfg)?;
    for b in &summary.benchmarks {
        for t in &b.trials {
            let mut line = format!(
                "{} {}: {} after {} cycle(s), {} crash(es)",
                b.id, t.trial_id, t.termination, t.cycles, t.crashes
            );
            if let Some(f) = &t.failure {
                line.push_str(&format!(" [{f}]"));
            }
            emit(out, line)?;
        }
    }
    let report = render_runs(&[cfg.output_dir.clone()], prices.as_ref(), None)?;
    write_report(&cfg.output_dir, &report)?;
    emit(out, "")?;
    emit(out, &report.text)?;
    emit(out, format!("results: {}", cfg.output_dir.display()))?;
    if !summary.failures.is_empty() {
        for f in &summary.failures {
            emit(out, format!("FAILED {}: {}", f.benchmark, f.error))?;
        }
        return Err(CliError {
            code: EXIT_AGENT,
            message: format!("{} benchmark(s) failed", summary.failures.len()),
        });
    }
    Ok(())
}
