//! The `fuzzgate` command line.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | usage error (bad flags or arguments) |
//! | 2 | unreadable or invalid input, I/O failure, refused input |
//! | 3 | agent failure (tool budget exhausted, backend or script failure, failed benchmarks in a run) |
//! | 4 | agent answered but its output could not be parsed |

pub mod config;
pub mod report;
pub mod run;

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fuzzgate_core::agent::LlmBackend;
use fuzzgate_core::analyzers::{serialize_constraint_report, serialize_verdict, AnalyzerError};
use fuzzgate_core::pipeline::{load_benchmarks, PipelineError};
use fuzzgate_core::replay::{bundle_bindings, ReplayError};
use fuzzgate_core::toolbox::{build_symbol_index, entry_points, NoTools, ToolError, ToolHost, ToolLimits};
use fuzzgate_core::{
    analyze_function, capture_session, run_agent, validate_crash, AgentError, AgentRole, AgentSession,
    BenchmarkFunction, Classification, CrashReport, Language, LiveBackend, Outcome, ProjectCheckout,
    PromptVariant, ReplayBackend, ScriptedBackend, SessionBundle, SessionContext, SymbolIndex, Toolbox,
};

pub use config::{BackendConfig, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_AGENT: i32 = 3;
pub const EXIT_MALFORMED: i32 = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(m: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: m.into() }
    }

    pub fn input(m: impl Into<String>) -> Self {
        Self { code: EXIT_INPUT, message: m.into() }
    }

    pub fn agent(m: impl Into<String>) -> Self {
        Self { code: EXIT_AGENT, message: m.into() }
    }

    pub fn io(path: &Path, e: impl fmt::Display) -> Self {
        Self::input(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<ToolError> for CliError {
    fn from(e: ToolError) -> Self {
        CliError::input(e.to_string())
    }
}

impl From<AgentError> for CliError {
    fn from(e: AgentError) -> Self {
        CliError::agent(e.to_string())
    }
}

impl From<AnalyzerError> for CliError {
    fn from(e: AnalyzerError) -> Self {
        let code = match &e {
            AnalyzerError::MalformedOutput { .. } => EXIT_MALFORMED,
            AnalyzerError::ToolBudgetExhausted { .. } | AnalyzerError::Agent(_) => EXIT_AGENT,
            _ => EXIT_INPUT,
        };
        CliError { code, message: e.to_string() }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Agent(a) => a.into(),
            PipelineError::Analyzer(a) => a.into(),
            other => CliError::input(other.to_string()),
        }
    }
}

impl From<ReplayError> for CliError {
    fn from(e: ReplayError) -> Self {
        match e {
            ReplayError::ExhaustedScript { .. } | ReplayError::Agent(_) => CliError::agent(e.to_string()),
            other => CliError::input(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "fuzzgate", version, about = "Constraint-guided fuzz driver generation and crash validation")]
pub struct Cli {
    /// More log output on stderr (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build and store the symbol index of a project.
    Index(IndexArgs),
    /// Derive calling constraints for one benchmark function.
    AnalyzeFunction(AnalyzeArgs),
    /// Decide whether a crash is reachable from the project's entry points.
    ValidateCrash(ValidateArgs),
    /// Run the full pipeline over a benchmark set.
    Run(RunArgs),
    /// Rerun a captured session and check the runs agree.
    Replay(ReplayArgs),
    /// Render report tables from finished runs.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

impl Switch {
    pub fn enabled(self) -> bool {
        self == Switch::On
    }
}

#[derive(Debug, Clone, Args)]
pub struct ProjectArgs {
    /// Project name (defaults to the directory name).
    #[arg(long)]
    pub name: Option<String>,
    /// Source language: c or c++.
    #[arg(long, default_value = "c")]
    pub language: String,
}

impl ProjectArgs {
    fn open(&self, dir: &Path) -> Result<ProjectCheckout, CliError> {
        let language: Language = self.language.parse().map_err(CliError::usage)?;
        let name = match &self.name {
            Some(n) => n.clone(),
            None => dir
                .canonicalize()
                .ok()
                .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
                .unwrap_or_else(|| "project".into()),
        };
        Ok(ProjectCheckout::open(name, dir, language)?)
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct BackendArgs {
    /// Scripted model: a directory of script bundles or one bundle file.
    #[arg(long, value_name = "PATH")]
    pub scripted: Option<PathBuf>,
    /// Replay a captured bundle exactly, tool results included.
    #[arg(long, value_name = "BUNDLE")]
    pub replay: Option<PathBuf>,
    /// OpenAI-compatible endpoint; the key is read from FUZZGATE_API_KEY.
    #[arg(long, value_name = "URL", requires = "model")]
    pub live_endpoint: Option<String>,
    /// Model id for the live endpoint.
    #[arg(long)]
    pub model: Option<String>,
}

impl BackendArgs {
    fn given(&self) -> usize {
        [self.scripted.is_some(), self.replay.is_some(), self.live_endpoint.is_some()]
            .iter()
            .filter(|b| **b)
            .count()
    }

    /// The selected backend; `None` when no backend flag was given.
    pub fn build(&self) -> Result<Option<Box<dyn LlmBackend>>, CliError> {
        match self.given() {
            0 => return Ok(None),
            1 => {}
            _ => return Err(CliError::usage("give exactly one of --scripted, --replay, --live-endpoint")),
        }
        if let Some(p) = &self.scripted {
            return scripted_backend(p).map(Some);
        }
        if let Some(p) = &self.replay {
            let b = ReplayBackend::from_file(p).map_err(|e| CliError::input(e.to_string()))?;
            return Ok(Some(Box::new(b)));
        }
        let endpoint = self.live_endpoint.clone().expect("one backend given");
        let model = self.model.clone().ok_or_else(|| CliError::usage("--live-endpoint needs --model"))?;
        Ok(Some(Box::new(LiveBackend::new(endpoint, model))))
    }

    fn require(&self) -> Result<Box<dyn LlmBackend>, CliError> {
        self.build()?
            .ok_or_else(|| CliError::usage("no model backend: give --scripted, --replay or --live-endpoint"))
    }
}

pub(crate) fn scripted_backend(path: &Path) -> Result<Box<dyn LlmBackend>, CliError> {
    if path.is_dir() {
        Ok(Box::new(ScriptedBackend::from_dir(path)))
    } else if path.is_file() {
        let b = ScriptedBackend::from_file(path).map_err(|e| CliError::input(e.to_string()))?;
        Ok(Box::new(b))
    } else {
        Err(CliError::input(format!("script path {} does not exist", path.display())))
    }
}

#[derive(Debug, Clone, Args)]
pub struct IndexArgs {
    pub project_dir: PathBuf,
    #[command(flatten)]
    pub project: ProjectArgs,
}

#[derive(Debug, Clone, Args)]
pub struct AgentArgs {
    /// Prompt flavour for the analysis agents.
    #[arg(long, default_value = "detailed")]
    pub variant: String,
    #[arg(long, default_value_t = fuzzgate_core::agent::DEFAULT_MAX_TOOL_CALLS)]
    pub max_tool_calls: usize,
}

impl AgentArgs {
    fn spec(&self, role: AgentRole) -> Result<fuzzgate_core::AgentSpec, CliError> {
        if self.max_tool_calls < 1 {
            return Err(CliError::usage("--max-tool-calls must be at least 1"));
        }
        let variant: PromptVariant = self.variant.parse().map_err(CliError::usage)?;
        Ok(role.spec_with_budget(variant, self.max_tool_calls))
    }
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    /// Benchmark file (YAML, one document per benchmark).
    pub benchmarks: PathBuf,
    /// Benchmark id; may be omitted when the file holds one benchmark.
    #[arg(long)]
    pub id: Option<String>,
    #[command(flatten)]
    pub backend: BackendArgs,
    #[command(flatten)]
    pub agent: AgentArgs,
    /// Where to write the constraint report (default `<id>.constraints.xmlish`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Where to capture the session (default next to the report).
    #[arg(long)]
    pub bundle: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    /// Crash report as JSON (the `crash.json` a run writes).
    pub crash_file: PathBuf,
    /// Indexed project checkout.
    #[arg(long)]
    pub project: PathBuf,
    #[command(flatten)]
    pub project_args: ProjectArgs,
    #[command(flatten)]
    pub backend: BackendArgs,
    #[command(flatten)]
    pub agent: AgentArgs,
    /// Where to write the verdict (default next to the crash file).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub bundle: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    pub config: PathBuf,
    #[arg(long, value_enum)]
    pub constraints: Option<Switch>,
    #[arg(long, value_enum)]
    pub validator: Option<Switch>,
    /// Concurrent trials.
    #[arg(long)]
    pub parallel: Option<usize>,
    #[arg(long)]
    pub n_trials: Option<usize>,
    #[arg(long)]
    pub max_cycles: Option<u32>,
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub prices: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub set_name: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    pub bundle: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub times: usize,
    /// Backend to replay against (default: the bundle itself, exactly).
    #[command(flatten)]
    pub backend: BackendArgs,
    /// Project checkout for live tool calls; without it tools are unavailable.
    #[arg(long)]
    pub project: Option<PathBuf>,
    #[command(flatten)]
    pub project_args: ProjectArgs,
    #[command(flatten)]
    pub agent: AgentArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Output directories of finished runs.
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
    #[arg(long)]
    pub prices: Option<PathBuf>,
    /// Rule file for judging constraint satisfaction of final drivers.
    #[arg(long)]
    pub judge_rules: Option<PathBuf>,
    /// Directory for report.txt and the CSV tables.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Runs one parsed command, writing user-facing output to `out`.
pub fn run_cli(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Index(a) => cmd_index(&a, out),
        Command::AnalyzeFunction(a) => cmd_analyze_function(&a, out),
        Command::ValidateCrash(a) => cmd_validate_crash(&a, out),
        Command::Run(a) => run::cmd_run(&a, out),
        Command::Replay(a) => cmd_replay(&a, out),
        Command::Report(a) => report::cmd_report(&a, out),
    }
}

pub(crate) fn emit(out: &mut dyn Write, text: impl fmt::Display) -> Result<(), CliError> {
    writeln!(out, "{text}").map_err(|e| CliError::input(format!("cannot write output: {e}")))
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fuzzgate_core::fsutil::write_atomic(path, contents.as_bytes()).map_err(|e| CliError::io(path, e))
}

fn plural(n: usize, one: &str, many: &str) -> String {
    format!("{n} {}", if n == 1 { one } else { many })
}

/// `3 functions, 2 edges, 1 entry point`. Edges to functions outside the
/// project are not counted.
pub fn index_summary(index: &SymbolIndex) -> String {
    let functions = index.definitions().count();
    let edges = index.call_edges().iter().filter(|e| !e.external).count();
    let eps = entry_points(index).len();
    format!(
        "{}, {}, {}",
        plural(functions, "function", "functions"),
        plural(edges, "edge", "edges"),
        plural(eps, "entry point", "entry points")
    )
}

pub fn cmd_index(a: &IndexArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let checkout = a.project.open(&a.project_dir)?;
    let index = build_symbol_index(&checkout)?;
    index.save(&checkout)?;
    emit(out, format!("wrote {}", checkout.index_path().display()))?;
    emit(out, index_summary(&index))
}

/// Loads a stored index, pointing the user at `index` when there is none.
pub fn require_index(checkout: &ProjectCheckout) -> Result<SymbolIndex, CliError> {
    match SymbolIndex::load(checkout) {
        Ok(i) => Ok(i),
        Err(ToolError::Io { .. }) => Err(CliError::input(format!(
            "no symbol index for {}; run `fuzzgate index {}` first",
            checkout.root().display(),
            checkout.root().display()
        ))),
        Err(e) => Err(e.into()),
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

/// Captures a failed analyzer session before turning the error into an
/// exit code.
fn capture_failure(e: AnalyzerError, bundle: &Path, out: &mut dyn Write) -> CliError {
    if let Some(session) = e.session() {
        match capture_session(session, bundle) {
            Ok(_) => {
                let _ = emit(out, format!("partial transcript: {}", bundle.display()));
            }
            Err(ce) => tracing::warn!(error = %ce, "could not capture failed session"),
        }
    }
    e.into()
}

pub fn cmd_analyze_function(a: &AnalyzeArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let specs = load_benchmarks(&a.benchmarks)?;
    let spec = match &a.id {
        Some(id) => specs
            .into_iter()
            .find(|b| &b.id == id)
            .ok_or_else(|| CliError::input(format!("no benchmark `{id}` in {}", a.benchmarks.display())))?,
        None if specs.len() == 1 => specs.into_iter().next().expect("one benchmark"),
        None => {
            return Err(CliError::usage(format!(
                "{} holds {} benchmarks; pick one with --id",
                a.benchmarks.display(),
                specs.len()
            )))
        }
    };
    let checkout = Arc::new(ProjectCheckout::open(&spec.project, &spec.project_dir, spec.language)?);
    let index = Arc::new(require_index(&checkout)?);
    let backend = a.backend.require()?;
    let agent_spec = a.agent.spec(AgentRole::FunctionAnalyzer)?;
    let benchmark = BenchmarkFunction::locate(
        spec.id.clone(),
        &checkout,
        &index,
        &spec.function_signature,
        Some(&spec.source_path),
    )?;
    let tools = Toolbox::new(checkout.clone(), index, ToolLimits::default());
    let out_path = a
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.constraints.xmlish", spec.id)));
    let bundle_path = a.bundle.clone().unwrap_or_else(|| with_suffix(&out_path, ".bundle.json"));
    let ctx = SessionContext::new(&spec.id, "", 0);
    let analyzed = match analyze_function(&benchmark, &checkout, &agent_spec, backend.as_ref(), &tools, &ctx) {
        Ok(a) => a,
        Err(e) => return Err(capture_failure(e, &bundle_path, out)),
    };
    capture_session(&analyzed.session, &bundle_path)?;
    write_file(&out_path, &serialize_constraint_report(&analyzed.value))?;
    let report = &analyzed.value;
    let by_cat: Vec<String> = fuzzgate_core::ConstraintCategory::ALL
        .iter()
        .map(|c| format!("{c} {}", report.count(*c)))
        .collect();
    emit(out, format!("{}: {} constraints ({})", spec.id, report.constraints.len(), by_cat.join(", ")))?;
    emit(out, format!("report: {}", out_path.display()))?;
    emit(out, format!("bundle: {}", bundle_path.display()))
}

pub fn load_crash(path: &Path) -> Result<CrashReport, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: not a crash report: {e}", path.display())))
}

pub fn cmd_validate_crash(a: &ValidateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let crash = load_crash(&a.crash_file)?;
    match crash.classification {
        Some(Classification::ProgramError) => {}
        Some(c) => {
            return Err(CliError::input(format!(
                "refusing to validate: the crash is classified {c}, so the driver is at fault and there is no reachability question to answer"
            )))
        }
        None => {
            return Err(CliError::input(
                "refusing to validate: the crash has no classification; only crashes classified ProgramError are validated",
            ))
        }
    }
    let checkout = Arc::new(a.project_args.open(&a.project)?);
    let index = Arc::new(require_index(&checkout)?);
    let backend = a.backend.require()?;
    let spec = a.agent.spec(AgentRole::CrashValidator)?;
    let eps = entry_points(&index);
    let tools = Toolbox::new(checkout.clone(), index, ToolLimits::default());
    let out_path = a.out.clone().unwrap_or_else(|| a.crash_file.with_extension("verdict.xmlish"));
    let bundle_path = a.bundle.clone().unwrap_or_else(|| with_suffix(&out_path, ".bundle.json"));
    let result = validate_crash(
        &crash,
        checkout.project_name(),
        &eps,
        &spec,
        backend.as_ref(),
        &tools,
        &SessionContext::default(),
    );
    let analyzed = match result {
        Ok(a) => a,
        Err(e) => return Err(capture_failure(e, &bundle_path, out)),
    };
    capture_session(&analyzed.session, &bundle_path)?;
    write_file(&out_path, &serialize_verdict(&analyzed.value))?;
    emit(out, format!("feasible={}", analyzed.value.feasible))
}

/// What a replayed run is compared on: the verdict for the validator, the
/// exact final output otherwise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunKey {
    Verdict(Option<bool>),
    Output(Outcome, String),
}

impl fmt::Display for RunKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunKey::Verdict(Some(v)) => write!(f, "feasible={v}"),
            RunKey::Verdict(None) => f.write_str("no verdict"),
            RunKey::Output(o, text) => {
                let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("").trim();
                write!(f, "{o} ({} bytes) {first}", text.len())
            }
        }
    }
}

fn run_key(role: AgentRole, s: &AgentSession) -> RunKey {
    if role == AgentRole::CrashValidator {
        RunKey::Verdict(
            s.is_completed()
                .then(|| fuzzgate_core::analyzers::parse_feasibility_output(&s.final_output).ok())
                .flatten()
                .map(|v| v.feasible),
        )
    } else {
        RunKey::Output(s.outcome, s.final_output.clone())
    }
}

/// Reruns a bundle `times` times. Run `i` uses attempt `i`, so a scripted
/// directory can hold `{agent}.attempt-{i}.bundle.json` variants.
pub fn replay_runs(
    bundle: &SessionBundle,
    spec: &fuzzgate_core::AgentSpec,
    backend: &dyn LlmBackend,
    tools: &dyn ToolHost,
    times: usize,
) -> Result<Vec<AgentSession>, CliError> {
    if bundle.meta.agent != spec.name {
        return Err(ReplayError::SpecMismatch {
            bundle: bundle.meta.agent.clone(),
            spec: spec.name.clone(),
        }
        .into());
    }
    let bindings = bundle_bindings(bundle, spec)?;
    let ctx = bundle.context();
    (1..=times)
        .map(|i| {
            run_agent(spec, &bindings, backend, tools, &ctx.clone().attempt(i as u32))
                .map_err(|e| ReplayError::from(e).into())
        })
        .collect()
}

pub fn cmd_replay(a: &ReplayArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if a.times < 1 {
        return Err(CliError::usage("--times must be at least 1"));
    }
    let bundle = SessionBundle::load(&a.bundle)?;
    if bundle.meta.agent.trim().is_empty() {
        return Err(CliError::input(format!("bundle names no agent: {}", a.bundle.display())));
    }
    let role: AgentRole = bundle
        .meta
        .agent
        .parse()
        .map_err(|e: String| CliError::input(format!("{}: {e}", a.bundle.display())))?;
    let spec = a.agent.spec(role)?;
    let backend: Box<dyn LlmBackend> = match a.backend.build()? {
        Some(b) => b,
        None => Box::new(ReplayBackend::new(bundle.clone())),
    };
    let tools: Box<dyn ToolHost> = match &a.project {
        Some(dir) => {
            let checkout = Arc::new(a.project_args.open(dir)?);
            let index = Arc::new(require_index(&checkout)?);
            Box::new(Toolbox::new(checkout, index, ToolLimits::default()))
        }
        None => Box::new(NoTools),
    };
    let sessions = replay_runs(&bundle, &spec, backend.as_ref(), tools.as_ref(), a.times)?;
    let keys: Vec<RunKey> = sessions.iter().map(|s| run_key(role, s)).collect();
    for (i, k) in keys.iter().enumerate() {
        emit(out, format!("run {}: {k}", i + 1))?;
    }
    if keys.len() > 1 {
        let agree = keys.iter().all(|k| *k == keys[0]);
        emit(out, if agree { "consistent" } else { "inconsistent" })?;
    }
    Ok(())
}
