use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{AgentError, SessionContext};
use crate::replay::SessionBundle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BackendKind {
    Live,
    Scripted,
    Replay,
}

/// One model conversation. Implementations see the whole message history on
/// every call.
pub trait Conversation: Send {
    fn respond(&mut self, messages: &[Message]) -> Result<String, AgentError>;

    /// A recorded tool result to use instead of executing the call. Only the
    /// replay backend returns one.
    fn recorded_tool_result(&mut self) -> Result<Option<String>, AgentError> {
        Ok(None)
    }
}

pub trait LlmBackend: Send + Sync {
    fn kind(&self) -> BackendKind;
    fn open(&self, agent: &str, context: &SessionContext)
        -> Result<Box<dyn Conversation>, AgentError>;
}

struct ScriptConversation {
    agent: String,
    responses: Vec<String>,
    tool_results: Option<Vec<String>>,
    next: usize,
    next_result: usize,
}

impl Conversation for ScriptConversation {
    fn respond(&mut self, _messages: &[Message]) -> Result<String, AgentError> {
        let r = self
            .responses
            .get(self.next)
            .cloned()
            .ok_or_else(|| AgentError::ExhaustedScript {
                agent: self.agent.clone(),
                consumed: self.next,
            })?;
        self.next += 1;
        Ok(r)
    }

    fn recorded_tool_result(&mut self) -> Result<Option<String>, AgentError> {
        let Some(results) = &self.tool_results else {
            return Ok(None);
        };
        let r = results
            .get(self.next_result)
            .cloned()
            .ok_or_else(|| AgentError::ExhaustedScript {
                agent: self.agent.clone(),
                consumed: self.next,
            })?;
        self.next_result += 1;
        Ok(Some(r))
    }
}

#[derive(Debug, Clone)]
enum ScriptSource {
    Bundle(Box<SessionBundle>),
    Dir(PathBuf),
}

/// Deterministic backend that re-emits the model responses stored in a
/// bundle. Tool calls run live against the session's tool host.
///
/// In directory mode the bundle is looked up by session context, trying
/// `{benchmark}/{trial}/cycle-{n}`, `{benchmark}/{trial}`,
/// `{benchmark}/cycle-{n}`, `{benchmark}` and the root in that order; in
/// each, `{agent}.attempt-{k}.bundle.json` is preferred over
/// `{agent}.bundle.json`.
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    source: ScriptSource,
}

impl ScriptedBackend {
    pub fn from_bundle(bundle: SessionBundle) -> Self {
        Self {
            source: ScriptSource::Bundle(Box::new(bundle)),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, AgentError> {
        Ok(Self::from_bundle(load_script(path)?))
    }

    pub fn from_dir(root: impl Into<PathBuf>) -> Self {
        Self {
            source: ScriptSource::Dir(root.into()),
        }
    }

    /// Candidate script paths for a session, most specific first.
    pub fn candidates(root: &Path, agent: &str, ctx: &SessionContext) -> Vec<PathBuf> {
        let b = ctx.benchmark_id.as_str();
        let t = ctx.trial_id.as_str();
        let cycle = format!("cycle-{}", ctx.cycle);
        let mut dirs: Vec<PathBuf> = Vec::new();
        if !b.is_empty() {
            if !t.is_empty() {
                dirs.push(root.join(b).join(t).join(&cycle));
                dirs.push(root.join(b).join(t));
            }
            dirs.push(root.join(b).join(&cycle));
            dirs.push(root.join(b));
        }
        dirs.push(root.to_path_buf());
        let mut out = Vec::new();
        for d in dirs {
            if ctx.attempt > 1 {
                out.push(d.join(format!("{agent}.attempt-{}.bundle.json", ctx.attempt)));
            }
            out.push(d.join(format!("{agent}.bundle.json")));
        }
        out
    }
}

fn load_script(path: &Path) -> Result<SessionBundle, AgentError> {
    SessionBundle::load(path).map_err(|e| AgentError::BadScript {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

impl LlmBackend for ScriptedBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Scripted
    }

    fn open(
        &self,
        agent: &str,
        context: &SessionContext,
    ) -> Result<Box<dyn Conversation>, AgentError> {
        let bundle = match &self.source {
            ScriptSource::Bundle(b) => (**b).clone(),
            ScriptSource::Dir(root) => {
                let candidates = Self::candidates(root, agent, context);
                match candidates.iter().find(|p| p.is_file()) {
                    Some(p) => load_script(p)?,
                    None => {
                        return Err(AgentError::ScriptNotFound {
                            agent: agent.to_string(),
                            searched: candidates.iter().map(|p| p.display().to_string()).collect(),
                        })
                    }
                }
            }
        };
        Ok(Box::new(ScriptConversation {
            agent: agent.to_string(),
            responses: bundle.responses(),
            tool_results: None,
            next: 0,
            next_result: 0,
        }))
    }
}

/// Exact re-emission of a captured session: model responses and tool
/// results both come from the bundle.
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    bundle: SessionBundle,
}

impl ReplayBackend {
    pub fn new(bundle: SessionBundle) -> Self {
        Self { bundle }
    }

    pub fn from_file(path: &Path) -> Result<Self, AgentError> {
        Ok(Self::new(load_script(path)?))
    }
}

impl LlmBackend for ReplayBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Replay
    }

    fn open(
        &self,
        agent: &str,
        _context: &SessionContext,
    ) -> Result<Box<dyn Conversation>, AgentError> {
        if agent != self.bundle.meta.agent {
            return Err(AgentError::BackendUnavailable(format!(
                "replay bundle was captured from `{}`, not `{agent}`",
                self.bundle.meta.agent
            )));
        }
        Ok(Box::new(ScriptConversation {
            agent: agent.to_string(),
            responses: self.bundle.responses(),
            tool_results: Some(self.bundle.tool_results()),
            next: 0,
            next_result: 0,
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn candidate_order() {
        let ctx = SessionContext::new("b", "trial-00", 2).attempt(2);
        let c = ScriptedBackend::candidates(Path::new("/s"), "enhancer", &ctx);
        let c: Vec<_> = c.iter().map(|p| p.display().to_string()).collect();
        assert_eq!(c[0], "/s/b/trial-00/cycle-2/enhancer.attempt-2.bundle.json");
        assert_eq!(c[1], "/s/b/trial-00/cycle-2/enhancer.bundle.json");
        assert_eq!(c.last().unwrap(), "/s/enhancer.bundle.json");
        assert_eq!(c.len(), 10);
    }

    #[test]
    fn exhausted_script() {
        let b = ScriptedBackend::from_bundle(SessionBundle::from_responses("a", &["x"]));
        let mut conv = b.open("a", &SessionContext::default()).unwrap();
        assert_eq!(conv.respond(&[]).unwrap(), "x");
        assert!(matches!(conv.respond(&[]), Err(AgentError::ExhaustedScript { .. })));
    }

    #[test]
    fn directory_lookup_falls_back() {
        let dir = tempfile::tempdir().unwrap();
        let bundle = SessionBundle::from_responses("prototyper", &["generic"]);
        bundle.save(&dir.path().join("prototyper.bundle.json")).unwrap();
        let specific = SessionBundle::from_responses("prototyper", &["specific"]);
        specific
            .save(&dir.path().join("b/trial-01/prototyper.bundle.json"))
            .unwrap();
        let backend = ScriptedBackend::from_dir(dir.path());
        let mut a = backend.open("prototyper", &SessionContext::new("b", "trial-01", 1)).unwrap();
        assert_eq!(a.respond(&[]).unwrap(), "specific");
        let mut g = backend.open("prototyper", &SessionContext::new("b", "trial-02", 1)).unwrap();
        assert_eq!(g.respond(&[]).unwrap(), "generic");
        assert!(matches!(
            backend.open("enhancer", &SessionContext::default()),
            Err(AgentError::ScriptNotFound { .. })
        ));
    }
}
