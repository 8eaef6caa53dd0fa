//! Capture-and-replay of agent sessions.
//!
//! A bundle stores the tagged sections of a session's prompt, its transcript
//! and its final answer. Re-rendering the agent's template from the stored
//! sections reproduces the original prompt, so a single agent can be rerun
//! in isolation against a replay, scripted or live backend.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{
    parse_directive, render_template, run_agent, AgentError, AgentSession, AgentSpec, Bindings,
    LlmBackend, Outcome, SessionContext, Turn, TurnKind,
};
use crate::markup::{self, MarkupError};
use crate::toolbox::ToolHost;

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed bundle {path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("unbalanced tags in log: {0}")]
    UnbalancedTags(#[from] MarkupError),
    #[error("bundle was captured from `{bundle}` but is being replayed as `{spec}`")]
    SpecMismatch { bundle: String, spec: String },
    #[error("bundle has no `{0}` section needed by the prompt template")]
    MissingComponent(String),
    #[error("replay ran past the recorded transcript of `{agent}` after {consumed} responses")]
    ExhaustedScript { agent: String, consumed: usize },
    #[error(transparent)]
    Agent(AgentError),
}

impl From<AgentError> for ReplayError {
    fn from(e: AgentError) -> Self {
        match e {
            AgentError::ExhaustedScript { agent, consumed } => {
                ReplayError::ExhaustedScript { agent, consumed }
            }
            other => ReplayError::Agent(other),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub agent: String,
    #[serde(default)]
    pub benchmark_id: String,
    #[serde(default)]
    pub trial_id: String,
    #[serde(default)]
    pub cycle: u32,
    /// Seconds since the Unix epoch.
    #[serde(default)]
    pub timestamp: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionBundle {
    pub meta: BundleMeta,
    #[serde(default)]
    pub prompt_components: IndexMap<String, String>,
    #[serde(default)]
    pub turns: Vec<Turn>,
    #[serde(default)]
    pub final_output: String,
    #[serde(default)]
    pub outcome: Outcome,
}

impl SessionBundle {
    /// A script bundle from a list of model responses. The last response is
    /// stored as the final output.
    pub fn from_responses(agent: &str, responses: &[&str]) -> Self {
        let mut bundle = SessionBundle {
            meta: BundleMeta {
                agent: agent.to_string(),
                ..Default::default()
            },
            ..Default::default()
        };
        if let Some((last, rest)) = responses.split_last() {
            for r in rest {
                let kind = if parse_directive(r).is_some() {
                    TurnKind::ToolCall
                } else {
                    TurnKind::ModelText
                };
                bundle.turns.push(Turn::new(kind, *r));
            }
            bundle.final_output = (*last).to_string();
        }
        bundle
    }

    pub fn from_session(session: &AgentSession, timestamp: u64) -> Self {
        let prompt_components = match extract_context(&session.resolved_prompt) {
            Ok(c) => c,
            Err(e) => {
                tracing::warn!(agent = %session.agent, error = %e, "prompt has unbalanced tags; capturing without components");
                IndexMap::new()
            }
        };
        SessionBundle {
            meta: BundleMeta {
                agent: session.agent.clone(),
                benchmark_id: session.context.benchmark_id.clone(),
                trial_id: session.context.trial_id.clone(),
                cycle: session.context.cycle,
                timestamp,
            },
            prompt_components,
            turns: session.turns.clone(),
            final_output: session.final_output.clone(),
            outcome: session.outcome,
        }
    }

    /// Model responses in the order the model produced them.
    pub fn responses(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .turns
            .iter()
            .filter(|t| matches!(t.kind, TurnKind::ToolCall | TurnKind::ModelText))
            .map(|t| t.payload.clone())
            .collect();
        if !self.final_output.is_empty() {
            out.push(self.final_output.clone());
        }
        out
    }

    pub fn tool_results(&self) -> Vec<String> {
        self.turns
            .iter()
            .filter(|t| t.kind == TurnKind::ToolResult)
            .map(|t| t.payload.clone())
            .collect()
    }

    pub fn context(&self) -> SessionContext {
        SessionContext::new(&self.meta.benchmark_id, &self.meta.trial_id, self.meta.cycle)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("bundle serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<(), ReplayError> {
        crate::fsutil::write_atomic(path, self.to_json().as_bytes()).map_err(|source| {
            ReplayError::Io {
                path: path.to_path_buf(),
                source,
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self, ReplayError> {
        let text = fs::read_to_string(path).map_err(|source| ReplayError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| ReplayError::Json {
            path: path.to_path_buf(),
            source,
        })
    }
}

fn now_secs() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Writes a session (completed or not) as a bundle and returns it.
pub fn capture_session(session: &AgentSession, dest: &Path) -> Result<SessionBundle, ReplayError> {
    let bundle = SessionBundle::from_session(session, now_secs());
    bundle.save(dest)?;
    Ok(bundle)
}

/// Content of every top-level `<tag>...</tag>` pair, keyed by tag name in
/// order of appearance. Nested markup stays inside its parent's content; a
/// repeated top-level tag keeps its first occurrence.
pub fn extract_context(log: &str) -> Result<IndexMap<String, String>, ReplayError> {
    let mut out = IndexMap::new();
    for el in markup::top_level(log)? {
        out.entry(el.name.to_string())
            .or_insert_with(|| el.content.to_string());
    }
    Ok(out)
}

/// Inverse of [`extract_context`] for tag-safe component maps.
pub fn embed_context(components: &IndexMap<String, String>) -> String {
    components
        .iter()
        .map(|(k, v)| format!("<{k}>{v}</{k}>"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Placeholder bindings for `spec` recovered from a bundle.
pub fn bundle_bindings(bundle: &SessionBundle, spec: &AgentSpec) -> Result<Bindings, ReplayError> {
    spec.placeholders()
        .into_iter()
        .map(|p| match bundle.prompt_components.get(&p) {
            Some(v) => Ok((p, v.clone())),
            None => Err(ReplayError::MissingComponent(p)),
        })
        .collect()
}

/// The resolved prompt of the captured session, rebuilt from its sections.
pub fn rebuild_prompt(bundle: &SessionBundle, spec: &AgentSpec) -> Result<String, ReplayError> {
    let bindings = bundle_bindings(bundle, spec)?;
    Ok(render_template(&spec.system_prompt, &bindings)?)
}

fn check_spec(bundle: &SessionBundle, spec: &AgentSpec) -> Result<(), ReplayError> {
    if bundle.meta.agent != spec.name {
        return Err(ReplayError::SpecMismatch {
            bundle: bundle.meta.agent.clone(),
            spec: spec.name.clone(),
        });
    }
    Ok(())
}

/// Reruns the captured agent with the prompt rebuilt from the bundle.
pub fn replay_agent(
    bundle: &SessionBundle,
    spec: &AgentSpec,
    backend: &dyn LlmBackend,
    tools: &dyn ToolHost,
) -> Result<AgentSession, ReplayError> {
    check_spec(bundle, spec)?;
    let bindings = bundle_bindings(bundle, spec)?;
    Ok(run_agent(spec, &bindings, backend, tools, &bundle.context())?)
}
