//! Chat policies: a deterministic scripted policy and a remote
//! chat-completion endpoint.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PolicyError {
    /// A scripted policy has no turns left.
    #[error("policy has no more turns")]
    Exhausted,
    #[error("policy endpoint failed after {attempts} attempt(s): {message}")]
    Transport { attempts: usize, message: String },
    #[error("policy configuration: {0}")]
    Config(String),
}

pub trait Policy: Send + Sync {
    /// The next assistant turn given the whole conversation so far.
    fn respond(&self, conversation: &[ChatMessage]) -> Result<String, PolicyError>;
}

/// Canned turns, returned in order regardless of the conversation.
#[derive(Debug)]
pub struct ScriptedPolicy {
    turns: Vec<String>,
    cursor: Mutex<usize>,
}

/// Separates turns in a script file.
pub const TURN_SEPARATOR: &str = "--- turn ---";
pub const SCRIPT_FILE: &str = "script.txt";

impl ScriptedPolicy {
    pub fn new(turns: Vec<String>) -> Self {
        Self {
            turns,
            cursor: Mutex::new(0),
        }
    }

    /// Splits a script on separator lines; text before the first separator
    /// is a comment.
    pub fn parse(script: &str) -> Self {
        let mut turns = Vec::new();
        let mut current: Option<String> = None;
        for line in script.lines() {
            if line.trim() == TURN_SEPARATOR {
                if let Some(t) = current.take() {
                    turns.push(t.trim().to_string());
                }
                current = Some(String::new());
            } else if let Some(t) = current.as_mut() {
                t.push_str(line);
                t.push('\n');
            }
        }
        if let Some(t) = current {
            turns.push(t.trim().to_string());
        }
        Self::new(turns)
    }

    /// Reads `path`, or `path/script.txt` when `path` is a directory. With
    /// `lane = Some(i)`, a directory's `lane_<i>.txt` takes precedence.
    pub fn load(path: &Path, lane: Option<usize>) -> Result<Self, PolicyError> {
        let file: PathBuf = if path.is_dir() {
            lane.map(|i| path.join(format!("lane_{i}.txt")))
                .filter(|p| p.is_file())
                .unwrap_or_else(|| path.join(SCRIPT_FILE))
        } else {
            path.to_path_buf()
        };
        let text = std::fs::read_to_string(&file)
            .map_err(|e| PolicyError::Config(format!("cannot read script {}: {e}", file.display())))?;
        Ok(Self::parse(&text))
    }

    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }
}

impl Policy for ScriptedPolicy {
    fn respond(&self, _conversation: &[ChatMessage]) -> Result<String, PolicyError> {
        let mut c = self.cursor.lock().expect("cursor lock");
        let turn = self.turns.get(*c).cloned().ok_or(PolicyError::Exhausted)?;
        *c += 1;
        Ok(turn)
    }
}

pub const DEFAULT_API_KEY_ENV: &str = "AHD_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    /// Base URL; requests go to `<endpoint>/chat/completions`.
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the bearer token; unset means no auth.
    pub api_key_env: String,
    pub temperature: f64,
    pub max_tokens: Option<u32>,
    pub timeout_secs: u64,
    pub retries: usize,
    pub backoff_ms: u64,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://127.0.0.1:8000/v1".into(),
            model: "default".into(),
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            temperature: 1.0,
            max_tokens: None,
            timeout_secs: 300,
            retries: 3,
            backoff_ms: 1000,
        }
    }
}

/// Client for an OpenAI-style chat-completion endpoint.
pub struct RemotePolicy {
    config: RemoteConfig,
    agent: ureq::Agent,
    api_key: Option<String>,
}

impl RemotePolicy {
    pub fn new(config: RemoteConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        Self { config, agent, api_key }
    }

    fn request_body(&self, conversation: &[ChatMessage]) -> Value {
        let mut body = json!({
            "model": self.config.model,
            "messages": conversation,
            "temperature": self.config.temperature,
        });
        if let Some(m) = self.config.max_tokens {
            body["max_tokens"] = json!(m);
        }
        body
    }

    fn once(&self, body: &Value) -> Result<String, String> {
        let url = format!("{}/chat/completions", self.config.endpoint.trim_end_matches('/'));
        let mut req = self.agent.post(&url).header("Content-Type", "application/json");
        if let Some(k) = &self.api_key {
            req = req.header("Authorization", format!("Bearer {k}"));
        }
        let mut resp = req.send_json(body).map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| e.to_string())?;
        if !(200..300).contains(&status) {
            return Err(format!("HTTP {status}: {}", text.chars().take(500).collect::<String>()));
        }
        extract_content(&text)
    }
}

/// The first choice's message content of a chat-completion response.
pub fn extract_content(response: &str) -> Result<String, String> {
    let v: Value = serde_json::from_str(response).map_err(|e| format!("response is not JSON: {e}"))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| "response has no choices[0].message.content".to_string())
}

impl Policy for RemotePolicy {
    fn respond(&self, conversation: &[ChatMessage]) -> Result<String, PolicyError> {
        let body = self.request_body(conversation);
        let attempts = self.config.retries + 1;
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(self.config.backoff_ms << (attempt - 1).min(6)));
            }
            match self.once(&body) {
                Ok(text) => return Ok(text),
                Err(e) => last = e,
            }
        }
        Err(PolicyError::Transport {
            attempts,
            message: last,
        })
    }
}
