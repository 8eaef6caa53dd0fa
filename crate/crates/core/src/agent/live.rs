use std::time::Duration;

use serde_json::{json, Value};

use super::backend::{BackendKind, Conversation, LlmBackend, Message};
use super::{AgentError, SessionContext};

pub const DEFAULT_API_KEY_ENV: &str = "FUZZGATE_API_KEY";

/// OpenAI-compatible chat-completions endpoint. The API key is read from an
/// environment variable when a conversation is opened and never stored in
/// configuration or bundles.
#[derive(Debug, Clone)]
pub struct LiveBackend {
    pub endpoint: String,
    pub model: String,
    pub api_key_env: String,
    pub timeout: Duration,
    /// Extra attempts after a failed request.
    pub retries: u32,
    pub temperature: Option<f64>,
}

impl LiveBackend {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key_env: DEFAULT_API_KEY_ENV.to_string(),
            timeout: Duration::from_secs(300),
            retries: 1,
            temperature: None,
        }
    }

    fn url(&self) -> String {
        let base = self.endpoint.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        }
    }
}

struct LiveConversation {
    agent: ureq::Agent,
    url: String,
    model: String,
    api_key: Option<String>,
    retries: u32,
    temperature: Option<f64>,
}

impl LiveConversation {
    fn request_once(&self, body: &Value) -> Result<String, String> {
        let mut req = self.agent.post(&self.url).set("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.set("Authorization", &format!("Bearer {key}"));
        }
        let resp = req.send_json(body.clone()).map_err(|e| match e {
            ureq::Error::Status(code, r) => {
                let text = r.into_string().unwrap_or_default();
                format!("HTTP {code}: {}", text.chars().take(500).collect::<String>())
            }
            other => other.to_string(),
        })?;
        let v: Value = resp.into_json().map_err(|e| format!("bad JSON response: {e}"))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| "response has no choices[0].message.content".to_string())
    }
}

impl Conversation for LiveConversation {
    fn respond(&mut self, messages: &[Message]) -> Result<String, AgentError> {
        let mut body = json!({
            "model": self.model,
            "messages": messages,
        });
        if let Some(t) = self.temperature {
            body["temperature"] = json!(t);
        }
        let mut last = String::new();
        for attempt in 0..=self.retries {
            match self.request_once(&body) {
                Ok(text) => return Ok(text),
                Err(e) => {
                    tracing::warn!(attempt, error = %e, "LLM request failed");
                    last = e;
                }
            }
        }
        Err(AgentError::BackendUnavailable(last))
    }
}

impl LlmBackend for LiveBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Live
    }

    fn open(
        &self,
        _agent: &str,
        _context: &SessionContext,
    ) -> Result<Box<dyn Conversation>, AgentError> {
        let agent = ureq::AgentBuilder::new().timeout(self.timeout).build();
        Ok(Box::new(LiveConversation {
            agent,
            url: self.url(),
            model: self.model.clone(),
            api_key: std::env::var(&self.api_key_env).ok().filter(|k| !k.is_empty()),
            retries: self.retries,
            temperature: self.temperature,
        }))
    }
}
