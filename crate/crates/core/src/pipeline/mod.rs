//! The writing, execution and analysis cycle that produces and refines fuzz
//! drivers, with constraint injection and verdict-driven enhancement.
//!
//! Stages exchange artifacts through a [`SharedRepository`]: each stage
//! provisions a copy of its benchmark's namespace, reads what earlier stages
//! left there, and syncs its own outputs back.

mod benchmark;
mod repository;
pub mod roles;

use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{run_agent, AgentError, AgentSession, Bindings, LlmBackend, Outcome, SessionContext, TokenUsage};
use crate::analyzers::{
    analyze_function, parse_constraint_report, parse_feasibility_output, serialize_constraint_report,
    serialize_verdict, validate_crash, AnalyzerError, BenchmarkFunction, Classification, ConstraintReport,
    CrashReport, FeasibilityVerdict,
};
use crate::catalog::{AgentRole, PromptVariant};
use crate::executor::{ExecutionResult, Executor, ExecutorError, FuzzDriver, DEFAULT_FUZZ_DURATION_S};
use crate::fsutil::write_atomic;
use crate::replay::{capture_session, ReplayError};
use crate::toolbox::{entry_points, Language, ProjectCheckout, SymbolIndex, ToolError, ToolHost};

pub use benchmark::{load_benchmarks, parse_benchmarks, BenchmarkSpec, ExecutorSpec, PreparedBenchmark};
pub use repository::{content_hash, Manifest, RepositoryError, SharedRepository, SyncSummary, Workspace};

pub const DEFAULT_MAX_CYCLES: u32 = 5;
pub const DEFAULT_PLATEAU_WINDOW: usize = 2;
pub const DEFAULT_PLATEAU_EPSILON: f64 = 0.01;
pub const DEFAULT_N_TRIALS: usize = 10;
pub const DEFAULT_WRITER_ATTEMPTS: u32 = 3;

/// Namespace-relative trial directory used by every stage.
const SHARED_TRIAL: &str = "shared";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Tool(#[from] ToolError),
    #[error(transparent)]
    Analyzer(#[from] AnalyzerError),
    #[error(transparent)]
    Executor(#[from] ExecutorError),
    #[error(transparent)]
    Repository(#[from] RepositoryError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error(transparent)]
    Agent(#[from] AgentError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Termination {
    #[default]
    Running,
    TruePositive,
    MaxCycles,
    CoveragePlateau,
    /// No driver could be built, or the trial hit a hard error.
    Failed,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Running => "Running",
            Termination::TruePositive => "TruePositive",
            Termination::MaxCycles => "MaxCycles",
            Termination::CoveragePlateau => "CoveragePlateau",
            Termination::Failed => "Failed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub max_cycles: u32,
    pub plateau_window: usize,
    pub plateau_epsilon: f64,
    pub constraints_enabled: bool,
    pub validator_enabled: bool,
    pub fuzz_duration_s: f64,
    /// Writer runs per cycle before the trial is given up as failed.
    pub writer_attempts: u32,
    pub max_tool_calls: usize,
    pub prompt_variant: PromptVariant,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            max_cycles: DEFAULT_MAX_CYCLES,
            plateau_window: DEFAULT_PLATEAU_WINDOW,
            plateau_epsilon: DEFAULT_PLATEAU_EPSILON,
            constraints_enabled: true,
            validator_enabled: true,
            fuzz_duration_s: DEFAULT_FUZZ_DURATION_S,
            writer_attempts: DEFAULT_WRITER_ATTEMPTS,
            max_tool_calls: crate::agent::DEFAULT_MAX_TOOL_CALLS,
            prompt_variant: PromptVariant::Detailed,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::Config(m.to_string()));
        if self.max_cycles < 1 {
            return bad("max_cycles must be at least 1");
        }
        if self.plateau_window < 2 {
            return bad("plateau_window must be at least 2");
        }
        if !(self.plateau_epsilon >= 0.0) {
            return bad("plateau_epsilon must be non-negative");
        }
        if !(self.fuzz_duration_s >= 0.0) {
            return bad("fuzz_duration_s must be non-negative");
        }
        if self.writer_attempts < 1 {
            return bad("writer_attempts must be at least 1");
        }
        if self.max_tool_calls < 1 {
            return bad("max_tool_calls must be at least 1");
        }
        Ok(())
    }

    fn spec(&self, role: AgentRole) -> crate::agent::AgentSpec {
        role.spec_with_budget(self.prompt_variant, self.max_tool_calls)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrashRecord {
    pub cycle: u32,
    pub crash: CrashReport,
    /// Absent when the validator is off or failed.
    pub verdict: Option<FeasibilityVerdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub agent: String,
    pub cycle: u32,
    pub attempt: u32,
    pub outcome: Option<Outcome>,
    pub tool_calls: usize,
    pub usage: TokenUsage,
    /// Set when the backend failed before a session existed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialState {
    pub benchmark: BenchmarkFunction,
    pub trial_id: String,
    /// Current (or last) cycle, 0 before the first one starts.
    pub cycle: u32,
    pub driver: Option<FuzzDriver>,
    pub execution: Option<ExecutionResult>,
    pub crash_history: Vec<CrashRecord>,
    /// One entry per completed cycle.
    pub coverage_history: Vec<f64>,
    pub termination: Termination,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    pub constraints_used: bool,
    pub sessions: Vec<SessionSummary>,
}

impl TrialState {
    pub fn new(benchmark: BenchmarkFunction, trial_id: impl Into<String>) -> Self {
        Self {
            benchmark,
            trial_id: trial_id.into(),
            cycle: 0,
            driver: None,
            execution: None,
            crash_history: Vec::new(),
            coverage_history: Vec::new(),
            termination: Termination::Running,
            failure: None,
            constraints_used: false,
            sessions: Vec::new(),
        }
    }

    pub fn completed_cycles(&self) -> usize {
        self.coverage_history.len()
    }

    fn fail(&mut self, reason: impl Into<String>) {
        self.termination = Termination::Failed;
        self.failure = Some(reason.into());
    }
}

/// Whether the coverage gain across the last `window` cycles is below
/// `epsilon`. Gains within 1e-9 of `epsilon` count as reaching it.
pub fn coverage_plateaued(history: &[f64], window: usize, epsilon: f64) -> bool {
    if window < 2 || history.len() < window {
        return false;
    }
    let recent = &history[history.len() - window..];
    let gain = recent[window - 1] - recent[0];
    gain + 1e-9 < epsilon
}

/// Stop decision after a completed cycle, or `None` to keep going.
/// TruePositive beats MaxCycles, which beats CoveragePlateau.
pub fn should_stop(state: &TrialState, config: &PipelineConfig) -> Option<Termination> {
    if state.coverage_history.is_empty() {
        return None;
    }
    let true_positive = state.crash_history.last().is_some_and(|r| {
        r.cycle == state.cycle
            && r.crash.classification == Some(Classification::ProgramError)
            && (!config.validator_enabled || r.verdict.as_ref().map_or(true, |v| v.feasible))
    });
    if true_positive {
        Some(Termination::TruePositive)
    } else if state.cycle >= config.max_cycles {
        Some(Termination::MaxCycles)
    } else if coverage_plateaued(
        &state.coverage_history,
        config.plateau_window,
        config.plateau_epsilon,
    ) {
        Some(Termination::CoveragePlateau)
    } else {
        None
    }
}

/// Where a run writes its outputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunLayout {
    pub root: PathBuf,
}

impl RunLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn repository(&self) -> PathBuf {
        self.root.join("repository")
    }

    pub fn state_path(&self, benchmark: &str, trial: &str) -> PathBuf {
        self.root.join("results").join(benchmark).join(trial).join("state.json")
    }

    pub fn bundles(&self) -> PathBuf {
        self.root.join("bundles")
    }

    pub fn bundle_path(&self, ctx: &SessionContext, agent: &str) -> PathBuf {
        let file = if ctx.attempt > 1 {
            format!("{agent}.attempt-{}.bundle.json", ctx.attempt)
        } else {
            format!("{agent}.bundle.json")
        };
        self.bundles()
            .join(&ctx.benchmark_id)
            .join(&ctx.trial_id)
            .join(format!("cycle-{}", ctx.cycle))
            .join(file)
    }

    pub fn work_dir(&self, benchmark: &str, trial: &str, cycle: u32) -> PathBuf {
        self.root
            .join("work")
            .join(benchmark)
            .join(trial)
            .join(format!("cycle-{cycle}"))
    }
}

/// Everything a trial needs besides its configuration.
#[derive(Clone, Copy)]
pub struct TrialEnv<'a> {
    pub checkout: &'a ProjectCheckout,
    pub index: &'a SymbolIndex,
    pub tools: &'a dyn ToolHost,
    pub backend: &'a dyn LlmBackend,
    pub executor: &'a dyn Executor,
    pub repo: &'a SharedRepository,
    pub layout: &'a RunLayout,
}

/// Repository path of a benchmark's stored constraint report.
pub fn constraints_path(benchmark: &BenchmarkFunction) -> String {
    format!("constraints/{}.xmlish", benchmark.function_hash())
}

fn constraints_failed_path(benchmark: &BenchmarkFunction) -> String {
    format!("constraints/{}.failed", benchmark.function_hash())
}

fn cycle_dir(trial: &str, cycle: u32) -> String {
    format!("trials/{trial}/cycle-{cycle}")
}

fn driver_file(language: Language) -> &'static str {
    match language {
        Language::C => "driver.c",
        Language::CPlusPlus => "driver.cc",
    }
}

/// Constraint list as injected into prompts: one numbered line per
/// constraint, statement verbatim.
pub fn render_constraints(report: &ConstraintReport) -> String {
    report
        .constraints
        .iter()
        .enumerate()
        .map(|(i, c)| format!("{}. [{}] {}", i + 1, c.category, c.statement))
        .collect::<Vec<_>>()
        .join("\n")
}

fn bindings<const N: usize>(pairs: [(&str, String); N]) -> Bindings {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

impl<'a> TrialEnv<'a> {
    fn capture(&self, session: &AgentSession) -> Result<(), PipelineError> {
        let path = self.layout.bundle_path(&session.context, &session.agent);
        capture_session(session, &path)?;
        Ok(())
    }

    fn summarize(session: &AgentSession) -> SessionSummary {
        SessionSummary {
            agent: session.agent.clone(),
            cycle: session.context.cycle,
            attempt: session.context.attempt,
            outcome: Some(session.outcome),
            tool_calls: session.tool_calls(),
            usage: session.token_usage,
            error: None,
        }
    }

    fn backend_failure(role: AgentRole, ctx: &SessionContext, e: &dyn fmt::Display) -> SessionSummary {
        tracing::warn!(agent = role.name(), benchmark = %ctx.benchmark_id, trial = %ctx.trial_id, cycle = ctx.cycle, error = %e, "agent did not run");
        SessionSummary {
            agent: role.name().to_string(),
            cycle: ctx.cycle,
            attempt: ctx.attempt,
            outcome: None,
            tool_calls: 0,
            usage: TokenUsage::default(),
            error: Some(e.to_string()),
        }
    }

    /// Runs a baseline agent, captures its bundle and records its summary.
    /// Returns the session when the agent got to run at all.
    fn run_role(
        &self,
        role: AgentRole,
        config: &PipelineConfig,
        bindings: &Bindings,
        ctx: &SessionContext,
        state: &mut TrialState,
    ) -> Result<Option<AgentSession>, PipelineError> {
        match run_agent(&config.spec(role), bindings, self.backend, self.tools, ctx) {
            Ok(session) => {
                self.capture(&session)?;
                state.sessions.push(Self::summarize(&session));
                Ok(Some(session))
            }
            Err(e) => {
                state.sessions.push(Self::backend_failure(role, ctx, &e));
                Ok(None)
            }
        }
    }
}

/// Runs the function analyzer once for a benchmark and stores its report
/// (or a failure marker) in the repository. A report already stored is
/// reused without running the agent.
pub fn prepare_constraints(
    benchmark: &BenchmarkFunction,
    env: &TrialEnv<'_>,
    config: &PipelineConfig,
) -> Result<FunctionAnalysis, PipelineError> {
    let ws = env.repo.provision(&benchmark.id)?;
    if let Some(text) = ws.read(&constraints_path(benchmark))? {
        if let Ok(mut report) = parse_constraint_report(&text) {
            report.target = benchmark.id.clone();
            return Ok(FunctionAnalysis {
                report: Some(report),
                session: None,
            });
        }
    }
    let ctx = SessionContext::new(&benchmark.id, SHARED_TRIAL, 0);
    let spec = config.spec(AgentRole::FunctionAnalyzer);
    let result = analyze_function(benchmark, env.checkout, &spec, env.backend, env.tools, &ctx);
    let analysis = match result {
        Ok(analyzed) => {
            env.capture(&analyzed.session)?;
            ws.write(&constraints_path(benchmark), serialize_constraint_report(&analyzed.value))?;
            FunctionAnalysis {
                report: Some(analyzed.value),
                session: Some(TrialEnv::summarize(&analyzed.session)),
            }
        }
        Err(e) => {
            let session = match e.session() {
                Some(session) => {
                    env.capture(session)?;
                    TrialEnv::summarize(session)
                }
                None => TrialEnv::backend_failure(AgentRole::FunctionAnalyzer, &ctx, &e),
            };
            tracing::warn!(benchmark = %benchmark.id, error = %e, "function analysis failed; trials run without constraints");
            ws.write(&constraints_failed_path(benchmark), e.to_string())?;
            FunctionAnalysis {
                report: None,
                session: Some(session),
            }
        }
    };
    env.repo.sync(&benchmark.id, &ws)?;
    Ok(analysis)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionAnalysis {
    pub report: Option<ConstraintReport>,
    /// Absent when a stored report was reused.
    pub session: Option<SessionSummary>,
}

/// What the writer of a cycle reads from the previous cycle's outputs.
struct WriterInputs {
    constraints: Option<ConstraintReport>,
    previous_driver: String,
    feedback: String,
    recommendations: String,
}

fn read_writer_inputs(
    ws: &Workspace,
    benchmark: &BenchmarkFunction,
    trial: &str,
    cycle: u32,
    config: &PipelineConfig,
) -> Result<WriterInputs, PipelineError> {
    let constraints = if config.constraints_enabled {
        ws.read(&constraints_path(benchmark))?
            .and_then(|t| parse_constraint_report(&t).ok())
            .filter(|r| !r.constraints.is_empty())
    } else {
        None
    };
    let mut inputs = WriterInputs {
        constraints,
        previous_driver: String::new(),
        feedback: String::new(),
        recommendations: String::new(),
    };
    if cycle > 1 {
        let prev = cycle_dir(trial, cycle - 1);
        inputs.previous_driver = ws
            .read(&format!("{prev}/{}", driver_file(benchmark.language)))?
            .unwrap_or_default();
        inputs.feedback = ws.read(&format!("{prev}/feedback.txt"))?.unwrap_or_default();
        if let Some(text) = ws.read(&format!("{prev}/verdict.xmlish"))? {
            match parse_feasibility_output(&text) {
                Ok(v) if !v.feasible => inputs.recommendations = v.recommendations,
                Ok(_) => {}
                Err(e) => tracing::warn!(trial, cycle, error = %e, "stored verdict unreadable"),
            }
        }
    }
    Ok(inputs)
}

/// Outcome of the writing and execution stages of one cycle.
enum Built {
    Ok(FuzzDriver, ExecutionResult),
    Failed(String),
}

fn write_and_execute(
    env: &TrialEnv<'_>,
    config: &PipelineConfig,
    state: &mut TrialState,
    inputs: &WriterInputs,
) -> Result<Built, PipelineError> {
    let b = state.benchmark.clone();
    let cycle = state.cycle;
    let role = if cycle == 1 { AgentRole::Prototyper } else { AgentRole::Enhancer };
    let constraints = inputs.constraints.as_ref().map(render_constraints).unwrap_or_default();
    let mut previous_driver = inputs.previous_driver.clone();
    let mut feedback = inputs.feedback.clone();
    let mut last_error = String::from("writer never ran");

    for attempt in 1..=config.writer_attempts {
        let ctx = SessionContext::new(&b.id, &state.trial_id, cycle).attempt(attempt);
        let binds = match role {
            AgentRole::Prototyper => bindings([
                ("project_name", b.project_name.clone()),
                ("function_signature", b.function_signature.clone()),
                ("function_source", b.source_code.clone()),
                ("constraints", constraints.clone()),
            ]),
            _ => bindings([
                ("project_name", b.project_name.clone()),
                ("function_signature", b.function_signature.clone()),
                ("function_source", b.source_code.clone()),
                ("constraints", constraints.clone()),
                ("previous_driver", previous_driver.clone()),
                ("feedback", feedback.clone()),
                ("recommendations", inputs.recommendations.clone()),
            ]),
        };
        let Some(session) = env.run_role(role, config, &binds, &ctx, state)? else {
            last_error = format!("{role} could not run");
            continue;
        };
        if !session.is_completed() {
            last_error = format!("{role} ended with {}", session.outcome);
            continue;
        }
        let source = match roles::parse_driver_output(&session.final_output) {
            Ok(s) => s,
            Err(e) => {
                last_error = format!("{role} output unusable: {e}");
                continue;
            }
        };
        let driver = FuzzDriver::new(source, cycle);
        let work = env.layout.work_dir(&b.id, &state.trial_id, cycle);
        match env.executor.execute(&driver, config.fuzz_duration_s, &work) {
            Ok(result) => {
                let mut driver = driver;
                driver.build_ok = true;
                return Ok(Built::Ok(driver, result));
            }
            Err(ExecutorError::BuildFailure(log)) => {
                tracing::info!(benchmark = %b.id, trial = %state.trial_id, cycle, attempt, "driver failed to build");
                last_error = format!("build failure: {log}");
                if role == AgentRole::Enhancer {
                    previous_driver = driver.source;
                    feedback = format!(
                        "{}\n\nThe last revision did not build:\n{log}",
                        inputs.feedback
                    )
                    .trim_start()
                    .to_string();
                }
            }
            Err(e) => return Ok(Built::Failed(format!("executor error: {e}"))),
        }
    }
    Ok(Built::Failed(format!(
        "no buildable driver after {} writer attempt(s); last: {last_error}",
        config.writer_attempts
    )))
}

/// Analysis stage: classifies and validates a crash, or explains coverage.
/// Writes feedback, crash and verdict files into `ws`.
fn analyze_execution(
    env: &TrialEnv<'_>,
    config: &PipelineConfig,
    state: &mut TrialState,
    ws: &Workspace,
    driver: &FuzzDriver,
    result: &ExecutionResult,
    constraints: &str,
) -> Result<(), PipelineError> {
    let b = state.benchmark.clone();
    let cycle = state.cycle;
    let dir = cycle_dir(&state.trial_id, cycle);
    let ctx = SessionContext::new(&b.id, &state.trial_id, cycle);

    let Some(crash) = result.crash.clone().filter(|_| result.crashed) else {
        let binds = bindings([
            ("project_name", b.project_name.clone()),
            ("function_signature", b.function_signature.clone()),
            ("fuzz_driver", driver.source.clone()),
            ("coverage", format!("{:.1}% of project lines", result.coverage * 100.0)),
            ("constraints", constraints.to_string()),
        ]);
        let insight = env
            .run_role(AgentRole::CoverageAnalyzer, config, &binds, &ctx, state)?
            .filter(AgentSession::is_completed)
            .and_then(|s| roles::parse_coverage_analysis(&s.final_output).ok())
            .unwrap_or_default();
        let feedback = format!(
            "The driver ran without crashing and reached {:.1}% line coverage.\n{insight}",
            result.coverage * 100.0
        );
        ws.write(&format!("{dir}/feedback.txt"), feedback.trim_end())?;
        return Ok(());
    };

    let mut crash = crash;
    let binds = bindings([
        ("project_name", b.project_name.clone()),
        ("function_signature", b.function_signature.clone()),
        ("fuzz_driver", driver.source.clone()),
        ("crash_type", crash.crash_type.clone()),
        ("stacktrace", crash.render_stacktrace()),
        ("crash_logs", crash.logs.clone()),
        ("constraints", constraints.to_string()),
    ]);
    let analysis = env
        .run_role(AgentRole::CrashAnalyzer, config, &binds, &ctx, state)?
        .filter(AgentSession::is_completed)
        .and_then(|s| roles::parse_crash_analysis(&s.final_output).ok());
    match analysis {
        Some(a) => {
            crash.classification = Some(a.classification);
            crash.root_cause = a.root_cause;
        }
        None => {
            // an unclassified crash stays in the report stream
            tracing::warn!(benchmark = %b.id, trial = %state.trial_id, cycle, "crash analysis failed; treating as a program error");
            crash.classification = Some(Classification::ProgramError);
        }
    }

    let mut record = CrashRecord {
        cycle,
        crash: crash.clone(),
        verdict: None,
        validation_error: None,
    };
    if config.validator_enabled && crash.classification == Some(Classification::ProgramError) {
        let spec = config.spec(AgentRole::CrashValidator);
        let eps = entry_points(env.index);
        match validate_crash(&crash, &b.project_name, &eps, &spec, env.backend, env.tools, &ctx) {
            Ok(analyzed) => {
                env.capture(&analyzed.session)?;
                state.sessions.push(TrialEnv::summarize(&analyzed.session));
                ws.write(&format!("{dir}/verdict.xmlish"), serialize_verdict(&analyzed.value))?;
                record.verdict = Some(analyzed.value);
            }
            Err(e) => {
                match e.session() {
                    Some(session) => {
                        env.capture(session)?;
                        state.sessions.push(TrialEnv::summarize(session));
                    }
                    None => state.sessions.push(TrialEnv::backend_failure(AgentRole::CrashValidator, &ctx, &e)),
                }
                tracing::warn!(benchmark = %b.id, trial = %state.trial_id, cycle, error = %e, "crash validation failed; crash kept");
                record.validation_error = Some(e.to_string());
            }
        }
    }

    let classification = crash.classification.map(|c| c.to_string()).unwrap_or_default();
    let mut feedback = format!(
        "The driver crashed with {} (classified {classification}).\nStack trace:\n{}",
        crash.crash_type,
        crash.render_stacktrace()
    );
    if !crash.root_cause.is_empty() {
        feedback.push_str(&format!("\nRoot cause: {}", crash.root_cause));
    }
    if let Some(v) = record.verdict.as_ref().filter(|v| !v.feasible) {
        feedback.push_str(&format!(
            "\nThe crash is not reachable from the project's entry points: {}",
            v.analysis
        ));
    }
    ws.write(&format!("{dir}/feedback.txt"), feedback)?;
    ws.write(
        &format!("{dir}/crash.json"),
        serde_json::to_string_pretty(&crash).expect("crash serializes"),
    )?;
    state.crash_history.push(record);
    Ok(())
}

fn save_state(layout: &RunLayout, state: &TrialState) -> Result<(), PipelineError> {
    let path = layout.state_path(&state.benchmark.id, &state.trial_id);
    let mut json = serde_json::to_string_pretty(state).expect("state serializes");
    json.push('\n');
    write_atomic(&path, json.as_bytes()).map_err(|source| PipelineError::Io { path, source })
}

fn run_cycles(env: &TrialEnv<'_>, config: &PipelineConfig, state: &mut TrialState) -> Result<(), PipelineError> {
    let b = state.benchmark.clone();
    for cycle in 1..=config.max_cycles {
        state.cycle = cycle;

        // writing and execution
        let ws = env.repo.provision(&b.id)?;
        let inputs = read_writer_inputs(&ws, &b, &state.trial_id, cycle, config)?;
        state.constraints_used |= inputs.constraints.is_some();
        let constraints = inputs.constraints.as_ref().map(render_constraints).unwrap_or_default();
        let (driver, result) = match write_and_execute(env, config, state, &inputs)? {
            Built::Ok(d, r) => (d, r),
            Built::Failed(reason) => {
                state.fail(reason);
                return Ok(());
            }
        };
        let dir = cycle_dir(&state.trial_id, cycle);
        ws.write(&format!("{dir}/{}", driver_file(b.language)), &driver.source)?;
        ws.write(
            &format!("{dir}/execution.json"),
            serde_json::to_string_pretty(&result).expect("result serializes"),
        )?;
        env.repo.sync(&b.id, &ws)?;
        drop(ws);

        // analysis
        let ws = env.repo.provision(&b.id)?;
        analyze_execution(env, config, state, &ws, &driver, &result, &constraints)?;
        env.repo.sync(&b.id, &ws)?;

        state.coverage_history.push(result.coverage);
        state.driver = Some(driver);
        state.execution = Some(result);
        if let Some(t) = should_stop(state, config) {
            state.termination = t;
            return Ok(());
        }
        save_state(env.layout, state)?;
    }
    unreachable!("MaxCycles stops the loop on its last cycle")
}

/// Runs one trial to termination and writes its state file. Hard errors end
/// the trial as `Failed` instead of propagating.
pub fn run_trial(
    benchmark: &BenchmarkFunction,
    trial_id: &str,
    config: &PipelineConfig,
    env: &TrialEnv<'_>,
) -> TrialState {
    let mut state = TrialState::new(benchmark.clone(), trial_id);
    if let Err(e) = config.validate().and_then(|_| run_cycles(env, config, &mut state)) {
        tracing::error!(benchmark = %benchmark.id, trial = trial_id, error = %e, "trial aborted");
        state.fail(e.to_string());
    }
    if let Err(e) = save_state(env.layout, &state) {
        tracing::error!(benchmark = %benchmark.id, trial = trial_id, error = %e, "could not write trial state");
    }
    state
}

pub fn trial_id(i: usize) -> String {
    format!("trial-{i:02}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRun {
    pub benchmark: String,
    /// Absent when constraints are off.
    pub function_analysis: Option<FunctionAnalysis>,
    pub trials: Vec<TrialState>,
}

/// Runs `n_trials` independent trials of one benchmark on the current rayon
/// pool. The function analyzer runs once beforehand when constraints are on.
pub fn run_benchmark(
    benchmark: &BenchmarkFunction,
    n_trials: usize,
    config: &PipelineConfig,
    env: &TrialEnv<'_>,
) -> Result<BenchmarkRun, PipelineError> {
    config.validate()?;
    if n_trials < 1 {
        return Err(PipelineError::Config("n_trials must be at least 1".into()));
    }
    let function_analysis = if config.constraints_enabled {
        Some(prepare_constraints(benchmark, env, config)?)
    } else {
        None
    };
    let trials = (0..n_trials)
        .into_par_iter()
        .map(|i| run_trial(benchmark, &trial_id(i), config, env))
        .collect();
    Ok(BenchmarkRun {
        benchmark: benchmark.id.clone(),
        function_analysis,
        trials,
    })
}

/// Reads a state file written by a trial.
pub fn load_state(path: &Path) -> Result<TrialState, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
}
