//! The agent loop: resolve a prompt template, exchange messages with an LLM
//! backend, execute `<tool name="...">args</tool>` directives against a tool
//! host, and validate the final answer with the agent's output parser.

mod backend;
mod live;
mod template;
mod tokens;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::markup;
use crate::toolbox::{ToolHost, ToolId};

pub use backend::{
    BackendKind, Conversation, LlmBackend, Message, ReplayBackend, Role, ScriptedBackend,
};
pub use live::LiveBackend;
pub use template::{placeholders, render_template, unwrapped_placeholders, Bindings};
pub use tokens::{count_tokens, ByteEstimator, TokenEstimator};

pub const DEFAULT_MAX_TOOL_CALLS: usize = 30;
pub const DEFAULT_MAX_REPROMPTS: usize = 2;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("LLM backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("script for `{agent}` ran out after {consumed} responses")]
    ExhaustedScript { agent: String, consumed: usize },
    #[error("no script for `{agent}` (searched {})", .searched.join(", "))]
    ScriptNotFound { agent: String, searched: Vec<String> },
    #[error("cannot load script {path}: {reason}")]
    BadScript { path: String, reason: String },
    #[error("placeholder `{{{{{0}}}}}` is not bound")]
    UnboundPlaceholder(String),
    #[error("invalid agent spec: {0}")]
    InvalidSpec(String),
}

/// Which parser validates an agent's final answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputParser {
    ConstraintReport,
    Feasibility,
    FuzzDriver,
    CrashAnalysis,
    CoverageAnalysis,
    JudgeFlags,
    FreeText,
}

impl OutputParser {
    /// Accepts or rejects a final answer, returning the parser's complaint.
    pub fn check(self, text: &str) -> Result<(), String> {
        use crate::{analyzers, pipeline::roles};
        match self {
            OutputParser::ConstraintReport => {
                analyzers::parse_constraint_report(text).map(drop).map_err(|e| e.to_string())
            }
            OutputParser::Feasibility => {
                analyzers::parse_feasibility_output(text).map(drop).map_err(|e| e.to_string())
            }
            OutputParser::FuzzDriver => roles::parse_driver_output(text).map(drop),
            OutputParser::CrashAnalysis => roles::parse_crash_analysis(text).map(drop),
            OutputParser::CoverageAnalysis => roles::parse_coverage_analysis(text).map(drop),
            OutputParser::JudgeFlags => crate::metrics::parse_judge_output(text).map(drop),
            OutputParser::FreeText => {
                if text.trim().is_empty() {
                    Err("empty response".into())
                } else {
                    Ok(())
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub name: String,
    /// Template with `{{placeholder}}` slots.
    pub system_prompt: String,
    pub tool_set: Vec<ToolId>,
    pub output_parser: OutputParser,
    pub max_tool_calls: usize,
    pub max_reprompts: usize,
}

impl AgentSpec {
    pub fn new(
        name: impl Into<String>,
        system_prompt: impl Into<String>,
        tool_set: Vec<ToolId>,
        output_parser: OutputParser,
    ) -> Self {
        Self {
            name: name.into(),
            system_prompt: system_prompt.into(),
            tool_set,
            output_parser,
            max_tool_calls: DEFAULT_MAX_TOOL_CALLS,
            max_reprompts: DEFAULT_MAX_REPROMPTS,
        }
    }

    pub fn with_limits(mut self, max_tool_calls: usize, max_reprompts: usize) -> Self {
        self.max_tool_calls = max_tool_calls;
        self.max_reprompts = max_reprompts;
        self
    }

    pub fn placeholders(&self) -> Vec<String> {
        placeholders(&self.system_prompt)
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        if self.name.trim().is_empty() {
            return Err(AgentError::InvalidSpec("agent name is empty".into()));
        }
        if self.max_tool_calls < 1 {
            return Err(AgentError::InvalidSpec(format!(
                "{}: max_tool_calls must be at least 1",
                self.name
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TurnKind {
    ToolCall,
    ToolResult,
    ModelText,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub kind: TurnKind,
    pub payload: String,
}

impl Turn {
    pub fn new(kind: TurnKind, payload: impl Into<String>) -> Self {
        Self {
            kind,
            payload: payload.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    #[default]
    Completed,
    ToolBudgetExhausted,
    MalformedOutput,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Completed => "Completed",
            Outcome::ToolBudgetExhausted => "ToolBudgetExhausted",
            Outcome::MalformedOutput => "MalformedOutput",
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub input: u64,
    pub tool: u64,
    pub output: u64,
}

impl TokenUsage {
    pub fn total(&self) -> u64 {
        self.input + self.tool + self.output
    }
}

impl std::ops::AddAssign for TokenUsage {
    fn add_assign(&mut self, rhs: Self) {
        self.input += rhs.input;
        self.tool += rhs.tool;
        self.output += rhs.output;
    }
}

/// Where a session sits in a pipeline run. Used by scripted backends to pick
/// a script and recorded in captured bundles.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SessionContext {
    pub benchmark_id: String,
    pub trial_id: String,
    pub cycle: u32,
    /// 1-based retry counter for agents that may run more than once per cycle.
    pub attempt: u32,
}

impl SessionContext {
    pub fn new(benchmark_id: impl Into<String>, trial_id: impl Into<String>, cycle: u32) -> Self {
        Self {
            benchmark_id: benchmark_id.into(),
            trial_id: trial_id.into(),
            cycle,
            attempt: 1,
        }
    }

    pub fn attempt(mut self, attempt: u32) -> Self {
        self.attempt = attempt;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentSession {
    pub agent: String,
    pub context: SessionContext,
    pub resolved_prompt: String,
    pub turns: Vec<Turn>,
    pub final_output: String,
    pub token_usage: TokenUsage,
    pub outcome: Outcome,
}

impl AgentSession {
    pub fn tool_calls(&self) -> usize {
        self.turns.iter().filter(|t| t.kind == TurnKind::ToolCall).count()
    }

    pub fn is_completed(&self) -> bool {
        self.outcome == Outcome::Completed
    }
}

/// Token accounting for a session: the prompt is input, tool traffic is
/// tool, and everything else the model wrote is output.
pub fn record_usage(session: &AgentSession) -> TokenUsage {
    record_usage_with(session, &ByteEstimator)
}

pub fn record_usage_with(session: &AgentSession, est: &dyn TokenEstimator) -> TokenUsage {
    let mut usage = TokenUsage {
        input: est.count(&session.resolved_prompt),
        tool: 0,
        output: est.count(&session.final_output),
    };
    for turn in &session.turns {
        let n = est.count(&turn.payload);
        match turn.kind {
            TurnKind::ToolCall | TurnKind::ToolResult => usage.tool += n,
            TurnKind::ModelText => usage.output += n,
        }
    }
    usage
}

/// A tool directive found in a model response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolDirective {
    pub name: Option<String>,
    pub args: String,
}

/// First `<tool name="...">args</tool>` directive in a response. An unclosed
/// directive is not a call; the response then goes to the output parser.
pub fn parse_directive(response: &str) -> Option<ToolDirective> {
    let el = markup::find_first(response, "tool").ok()??;
    Some(ToolDirective {
        name: el.attr("name").map(str::to_string),
        args: el.content.trim().to_string(),
    })
}

pub fn reprompt_text(reason: &str) -> String {
    format!(
        "Your previous response could not be parsed: {reason}\n\
         Reply again with only the requested output format, or issue a tool call."
    )
}

pub fn tool_result_message(tool: &str, result: &str) -> String {
    format!("<tool_result name=\"{tool}\">\n{result}\n</tool_result>")
}

fn execute_directive(spec: &AgentSpec, tools: &dyn ToolHost, d: &ToolDirective) -> String {
    let Some(name) = d.name.as_deref() else {
        return "error: tool directive is missing the name attribute".to_string();
    };
    match name.parse::<ToolId>() {
        Ok(id) if spec.tool_set.contains(&id) => tools.invoke(id, &d.args),
        Ok(id) => format!("error: tool `{id}` is not available to {}", spec.name),
        Err(e) => format!("error: {e}"),
    }
}

/// Runs one agent session to completion. Budget exhaustion and malformed
/// output are session outcomes, not errors; `Err` means the session could not
/// run at all (unbound placeholder, backend failure, exhausted script).
pub fn run_agent(
    spec: &AgentSpec,
    bindings: &Bindings,
    backend: &dyn LlmBackend,
    tools: &dyn ToolHost,
    context: &SessionContext,
) -> Result<AgentSession, AgentError> {
    spec.validate()?;
    let prompt = render_template(&spec.system_prompt, bindings)?;
    let mut conv = backend.open(&spec.name, context)?;
    let mut messages = vec![Message::user(prompt.clone())];
    let mut turns = Vec::new();
    let mut calls = 0usize;
    let mut reprompts = 0usize;
    let mut final_output = String::new();

    let outcome = loop {
        let response = conv.respond(&messages)?;
        messages.push(Message::assistant(response.clone()));
        if let Some(directive) = parse_directive(&response) {
            if calls >= spec.max_tool_calls {
                turns.push(Turn::new(TurnKind::ModelText, response));
                break Outcome::ToolBudgetExhausted;
            }
            calls += 1;
            turns.push(Turn::new(TurnKind::ToolCall, response));
            let result = match conv.recorded_tool_result()? {
                Some(r) => r,
                None => execute_directive(spec, tools, &directive),
            };
            let label = directive.name.as_deref().unwrap_or("unknown");
            messages.push(Message::user(tool_result_message(label, &result)));
            turns.push(Turn::new(TurnKind::ToolResult, result));
            continue;
        }
        match spec.output_parser.check(&response) {
            Ok(()) => {
                final_output = response;
                break Outcome::Completed;
            }
            Err(reason) => {
                turns.push(Turn::new(TurnKind::ModelText, response));
                if reprompts >= spec.max_reprompts {
                    break Outcome::MalformedOutput;
                }
                reprompts += 1;
                messages.push(Message::user(reprompt_text(&reason)));
            }
        }
    };

    let mut session = AgentSession {
        agent: spec.name.clone(),
        context: context.clone(),
        resolved_prompt: prompt,
        turns,
        final_output,
        token_usage: TokenUsage::default(),
        outcome,
    };
    session.token_usage = record_usage(&session);
    tracing::debug!(
        agent = %spec.name,
        outcome = %session.outcome,
        tool_calls = calls,
        "agent session finished"
    );
    Ok(session)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::replay::SessionBundle;
    use crate::toolbox::NoTools;

    struct Echo;
    impl ToolHost for Echo {
        fn invoke(&self, tool: ToolId, args: &str) -> String {
            format!("{tool}:{args}")
        }
    }

    fn spec(parser: OutputParser) -> AgentSpec {
        AgentSpec::new(
            "tester",
            "<task>{{task}}</task>",
            vec![ToolId::CodeSearch],
            parser,
        )
    }

    fn bindings() -> Bindings {
        [("task".to_string(), "look around".to_string())].into_iter().collect()
    }

    fn scripted(responses: &[&str]) -> ScriptedBackend {
        ScriptedBackend::from_bundle(SessionBundle::from_responses("tester", responses))
    }

    #[test]
    fn tool_then_final() {
        let backend = scripted(&[r#"<tool name="code_search">grep -rn x .</tool>"#, "done"]);
        let s = run_agent(
            &spec(OutputParser::FreeText),
            &bindings(),
            &backend,
            &Echo,
            &SessionContext::default(),
        )
        .unwrap();
        assert_eq!(s.outcome, Outcome::Completed);
        assert_eq!(s.final_output, "done");
        let kinds: Vec<_> = s.turns.iter().map(|t| t.kind).collect();
        assert_eq!(kinds, vec![TurnKind::ToolCall, TurnKind::ToolResult]);
        assert_eq!(s.turns[1].payload, "code_search:grep -rn x .");
        assert_eq!(s.resolved_prompt, "<task>look around</task>");
    }

    #[test]
    fn budget_is_enforced() {
        let call = r#"<tool name="code_search">ls</tool>"#;
        let backend = scripted(&[call, call, call, "never reached"]);
        let sp = spec(OutputParser::FreeText).with_limits(2, 2);
        let s = run_agent(&sp, &bindings(), &backend, &Echo, &SessionContext::default()).unwrap();
        assert_eq!(s.outcome, Outcome::ToolBudgetExhausted);
        assert_eq!(s.tool_calls(), 2);
        assert!(s.final_output.is_empty());
    }

    #[test]
    fn reprompts_then_malformed() {
        let backend = scripted(&["nope", "still nope"]);
        let sp = spec(OutputParser::Feasibility).with_limits(30, 1);
        let s = run_agent(&sp, &bindings(), &backend, &NoTools, &SessionContext::default()).unwrap();
        assert_eq!(s.outcome, Outcome::MalformedOutput);
        assert_eq!(s.turns.len(), 2);
        assert!(s.final_output.is_empty());
    }

    #[test]
    fn unavailable_tools_are_reported_to_the_model() {
        let backend = scripted(&[r#"<tool name="entry_points"></tool>"#, "ok"]);
        let s = run_agent(
            &spec(OutputParser::FreeText),
            &bindings(),
            &backend,
            &Echo,
            &SessionContext::default(),
        )
        .unwrap();
        assert!(s.turns[1].payload.starts_with("error: tool `entry_points` is not available"));
    }

    #[test]
    fn unbound_placeholder_fails_before_backend() {
        let backend = scripted(&[]);
        let err = run_agent(
            &spec(OutputParser::FreeText),
            &Bindings::new(),
            &backend,
            &NoTools,
            &SessionContext::default(),
        )
        .unwrap_err();
        assert!(matches!(err, AgentError::UnboundPlaceholder(_)));
    }

    #[test]
    fn usage_partitions_transcript() {
        let backend = scripted(&[r#"<tool name="code_search">ls</tool>"#, "bad", "fine"]);
        let s = run_agent(
            &spec(OutputParser::FreeText),
            &bindings(),
            &backend,
            &Echo,
            &SessionContext::default(),
        )
        .unwrap();
        let u = s.token_usage;
        let all: u64 = std::iter::once(&s.resolved_prompt)
            .chain(s.turns.iter().map(|t| &t.payload))
            .chain(std::iter::once(&s.final_output))
            .map(|t| count_tokens(t))
            .sum();
        assert_eq!(u.total(), all);
        assert_eq!(u.input, count_tokens(&s.resolved_prompt));
    }
}
