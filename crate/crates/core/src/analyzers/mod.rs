//! The two analysis agents: the function analyzer, which derives calling
//! constraints for a target function, and the crash validator, which decides
//! whether a crash is reachable from the project's entry points.

mod constraints;
mod crash;
mod feasibility;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agent::{run_agent, AgentError, AgentSession, AgentSpec, Bindings, LlmBackend, Outcome, SessionContext};
use crate::toolbox::{
    function_search, signature_name, symbol_matches, Language, ProjectCheckout, SymbolIndex,
    ToolError, ToolHost,
};

pub use constraints::{
    parse_constraint_report, serialize_constraint_report, ConstraintCategory, ConstraintReport,
    FunctionConstraint,
};
pub use crash::{Classification, CrashReport, StackFrame};
pub use feasibility::{parse_feasibility_output, serialize_verdict, FeasibilityVerdict};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed output: {0}")]
pub struct MalformedOutput(pub String);

#[derive(Debug, Error)]
pub enum AnalyzerError {
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("{agent} produced unusable output: {reason}")]
    MalformedOutput {
        agent: String,
        reason: String,
        session: Box<AgentSession>,
    },
    #[error("{agent} used its whole tool budget without answering")]
    ToolBudgetExhausted {
        agent: String,
        session: Box<AgentSession>,
    },
    #[error("crash is classified {0}; only program errors are validated")]
    NotProgramError(Classification),
    #[error("crash has no classification; run the crash analyzer first")]
    Unclassified,
    #[error("crash report has no stack frames")]
    NoFrames,
    #[error("invalid benchmark: {0}")]
    InvalidBenchmark(String),
    #[error(transparent)]
    Tool(#[from] ToolError),
}

impl AnalyzerError {
    /// The transcript of a session that ran but failed, if any.
    pub fn session(&self) -> Option<&AgentSession> {
        match self {
            AnalyzerError::MalformedOutput { session, .. }
            | AnalyzerError::ToolBudgetExhausted { session, .. } => Some(session),
            _ => None,
        }
    }
}

/// A parsed agent answer together with the session that produced it.
#[derive(Debug, Clone)]
pub struct Analyzed<T> {
    pub value: T,
    pub session: AgentSession,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceLocation {
    pub file: String,
    pub line: u32,
}

impl std::fmt::Display for SourceLocation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.file, self.line)
    }
}

impl std::str::FromStr for SourceLocation {
    type Err = String;

    /// `path` or `path:line`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Err("empty source path".into());
        }
        match s.rsplit_once(':') {
            Some((file, line)) if !file.is_empty() && line.chars().all(|c| c.is_ascii_digit()) && !line.is_empty() => {
                Ok(SourceLocation {
                    file: file.to_string(),
                    line: line.parse().map_err(|e| format!("bad line number: {e}"))?,
                })
            }
            _ => Ok(SourceLocation {
                file: s.to_string(),
                line: 0,
            }),
        }
    }
}

/// One target function in one project.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkFunction {
    pub id: String,
    pub project_name: String,
    pub function_name: String,
    pub function_signature: String,
    pub source_code: String,
    pub source_path: SourceLocation,
    pub language: Language,
}

impl BenchmarkFunction {
    /// Looks the function up in the index. When several definitions match,
    /// the one in `hint`'s file (and at its line, if given) wins.
    pub fn locate(
        id: impl Into<String>,
        checkout: &ProjectCheckout,
        index: &SymbolIndex,
        signature: &str,
        hint: Option<&SourceLocation>,
    ) -> Result<Self, AnalyzerError> {
        let signature = signature.trim();
        if signature.is_empty() {
            return Err(AnalyzerError::InvalidBenchmark("empty function signature".into()));
        }
        let name = signature_name(signature).ok_or_else(|| {
            AnalyzerError::InvalidBenchmark(format!("cannot find a function name in `{signature}`"))
        })?;
        let found = function_search(index, checkout, &name)?;
        let pick = hint
            .and_then(|h| {
                found
                    .iter()
                    .filter(|m| m.file == h.file)
                    .find(|m| h.line == 0 || m.line_start == h.line)
            })
            .or_else(|| found.first())
            .expect("function_search returns at least one match");
        if let Some(h) = hint {
            checkout.resolve(&h.file)?;
        }
        let qualified = index
            .definitions()
            .find(|f| f.file == pick.file && f.line_start == pick.line_start && symbol_matches(&name, &f.name))
            .map(|f| f.name.clone())
            .unwrap_or(name);
        Ok(BenchmarkFunction {
            id: id.into(),
            project_name: checkout.project_name().to_string(),
            function_name: qualified,
            function_signature: signature.to_string(),
            source_code: pick.source_text.clone(),
            source_path: SourceLocation {
                file: pick.file.clone(),
                line: pick.line_start,
            },
            language: checkout.language(),
        })
    }

    /// Stable short hash naming this function's constraint file.
    pub fn function_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.project_name.as_bytes());
        h.update([0]);
        h.update(self.function_signature.as_bytes());
        hex::encode(&h.finalize()[..8])
    }
}

fn finish<T>(
    session: AgentSession,
    parse: impl FnOnce(&str) -> Result<T, MalformedOutput>,
) -> Result<Analyzed<T>, AnalyzerError> {
    match session.outcome {
        Outcome::Completed => match parse(&session.final_output) {
            Ok(value) => Ok(Analyzed { value, session }),
            Err(e) => Err(AnalyzerError::MalformedOutput {
                agent: session.agent.clone(),
                reason: e.0,
                session: Box::new(session),
            }),
        },
        Outcome::ToolBudgetExhausted => Err(AnalyzerError::ToolBudgetExhausted {
            agent: session.agent.clone(),
            session: Box::new(session),
        }),
        Outcome::MalformedOutput => Err(AnalyzerError::MalformedOutput {
            agent: session.agent.clone(),
            reason: "final answer rejected after reprompts".into(),
            session: Box::new(session),
        }),
    }
}

pub fn function_analyzer_bindings(benchmark: &BenchmarkFunction, checkout: &ProjectCheckout) -> Bindings {
    [
        ("project_name", benchmark.project_name.clone()),
        ("project_path", checkout.root().display().to_string()),
        ("function_signature", benchmark.function_signature.clone()),
        ("source_location", benchmark.source_path.to_string()),
        ("function_source", benchmark.source_code.clone()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

/// Runs the function analyzer and parses its constraint report.
pub fn analyze_function(
    benchmark: &BenchmarkFunction,
    checkout: &ProjectCheckout,
    spec: &AgentSpec,
    backend: &dyn LlmBackend,
    tools: &dyn ToolHost,
    context: &SessionContext,
) -> Result<Analyzed<ConstraintReport>, AnalyzerError> {
    let bindings = function_analyzer_bindings(benchmark, checkout);
    let session = run_agent(spec, &bindings, backend, tools, context)?;
    let mut analyzed = finish(session, parse_constraint_report)?;
    analyzed.value.target = benchmark.id.clone();
    Ok(analyzed)
}

pub fn crash_validator_bindings(
    project_name: &str,
    crash: &CrashReport,
    entry_points: &[String],
) -> Bindings {
    [
        ("project_name", project_name.to_string()),
        ("crash_type", crash.crash_type.clone()),
        ("stacktrace", crash.render_stacktrace()),
        ("crash_logs", crash.logs.clone()),
        ("root_cause", crash.root_cause.clone()),
        ("entry_points", entry_points.join("\n")),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

/// Runs the crash validator on a crash already classified as a program
/// error. Driver errors are refused: they are the driver's fault by
/// definition and need no reachability check.
pub fn validate_crash(
    crash: &CrashReport,
    project_name: &str,
    entry_points: &[String],
    spec: &AgentSpec,
    backend: &dyn LlmBackend,
    tools: &dyn ToolHost,
    context: &SessionContext,
) -> Result<Analyzed<FeasibilityVerdict>, AnalyzerError> {
    match crash.classification {
        Some(Classification::ProgramError) => {}
        Some(other) => return Err(AnalyzerError::NotProgramError(other)),
        None => return Err(AnalyzerError::Unclassified),
    }
    if crash.stacktrace.is_empty() {
        return Err(AnalyzerError::NoFrames);
    }
    let bindings = crash_validator_bindings(project_name, crash, entry_points);
    let session = run_agent(spec, &bindings, backend, tools, context)?;
    finish(session, parse_feasibility_output)
}
