//! Chat completion clients: OpenAI-compatible HTTP and a scripted mock.

use std::path::Path;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use super::prompt::{ChatMessage, Role};
use crate::endpoint::excerpt;

pub const ENV_LLM_URL: &str = "SPARQLGEN_LLM_URL";
pub const ENV_LLM_API_KEY: &str = "SPARQLGEN_LLM_API_KEY";
pub const ENV_LLM_MODEL: &str = "SPARQLGEN_LLM_MODEL";

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("LLM service returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("LLM service unreachable: {0}")]
    Transport(String),
    #[error("malformed LLM response: {0}")]
    MalformedResponse(String),
    #[error("invalid mock script {path}: {reason}")]
    Script { path: String, reason: String },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt: u64,
    pub completion: u64,
}

impl std::ops::Add for TokenUsage {
    type Output = TokenUsage;

    fn add(self, o: TokenUsage) -> TokenUsage {
        TokenUsage {
            prompt: self.prompt + o.prompt,
            completion: self.completion + o.completion,
        }
    }
}

impl std::iter::Sum for TokenUsage {
    fn sum<I: Iterator<Item = TokenUsage>>(iter: I) -> Self {
        iter.fold(TokenUsage::default(), |a, b| a + b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub content: String,
    pub usage: TokenUsage,
    /// Requests repeated after a retryable failure.
    pub retries: u32,
}

#[async_trait]
pub trait LlmClient: Send + Sync {
    fn model(&self) -> &str;

    async fn complete(&self, messages: &[ChatMessage]) -> Result<Completion, LlmError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub factor: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 1,
            base_delay: Duration::from_secs(1),
            factor: 2,
        }
    }
}

impl RetryPolicy {
    pub fn delay(&self, attempt: u32) -> Duration {
        self.base_delay * self.factor.saturating_pow(attempt)
    }
}

#[derive(Debug, Clone)]
pub struct OpenAiClient {
    http: reqwest::Client,
    base_url: String,
    api_key: Option<String>,
    model: String,
    retry: RetryPolicy,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Deserialize)]
struct ResponseMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct Usage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

impl OpenAiClient {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        let http = reqwest::Client::builder()
            .timeout(Duration::from_secs(300))
            .build()
            .unwrap_or_default();
        OpenAiClient {
            http,
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key: None,
            model: model.into(),
            retry: RetryPolicy::default(),
        }
    }

    /// Base URL, key and model from `SPARQLGEN_LLM_*`; explicit arguments win.
    /// `None` when no URL or model is known.
    pub fn from_env(base_url: Option<String>, model: Option<String>) -> Option<Self> {
        let url = base_url.or_else(|| std::env::var(ENV_LLM_URL).ok())?;
        let model = model.or_else(|| std::env::var(ENV_LLM_MODEL).ok())?;
        Some(Self::new(url, model).with_api_key(std::env::var(ENV_LLM_API_KEY).ok()))
    }

    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key.filter(|k| !k.is_empty());
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    async fn attempt(&self, messages: &[ChatMessage]) -> Result<(String, TokenUsage), LlmError> {
        let mut req = self
            .http
            .post(format!("{}/chat/completions", self.base_url))
            .json(&json!({ "model": self.model, "messages": messages }));
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().await.map_err(|e| LlmError::Transport(e.to_string()))?;
        let status = resp.status();
        let body = resp.text().await.map_err(|e| LlmError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(LlmError::Status {
                status: status.as_u16(),
                body: excerpt(&body),
            });
        }
        let parsed: ChatResponse =
            serde_json::from_str(&body).map_err(|e| LlmError::MalformedResponse(e.to_string()))?;
        let content = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| LlmError::MalformedResponse("no choices[0].message.content".into()))?;
        let usage = parsed
            .usage
            .map(|u| TokenUsage {
                prompt: u.prompt_tokens,
                completion: u.completion_tokens,
            })
            .unwrap_or_default();
        Ok((content, usage))
    }
}

fn retryable(e: &LlmError) -> bool {
    match e {
        LlmError::Status { status, .. } => *status == 429 || *status >= 500,
        LlmError::Transport(_) => true,
        _ => false,
    }
}

#[async_trait]
impl LlmClient for OpenAiClient {
    fn model(&self) -> &str {
        &self.model
    }

    async fn complete(&self, messages: &[ChatMessage]) -> Result<Completion, LlmError> {
        let mut retries = 0;
        loop {
            match self.attempt(messages).await {
                Ok((content, usage)) => {
                    return Ok(Completion {
                        content,
                        usage,
                        retries,
                    })
                }
                Err(e) if retryable(&e) && retries < self.retry.max_retries => {
                    let wait = self.retry.delay(retries);
                    tracing::warn!(error = %e, ?wait, "retrying chat completion");
                    tokio::time::sleep(wait).await;
                    retries += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

/// A canned reply: text, or an HTTP-style failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MockReply {
    Text(String),
    Fail { status: u16, body: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockRule {
    pub contains: String,
    pub responses: Vec<MockReply>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
enum ScriptFile {
    List(Vec<MockReply>),
    Rules {
        #[serde(default)]
        model: Option<String>,
        rules: Vec<MockRule>,
        #[serde(default)]
        default: Vec<MockReply>,
    },
}

/// Deterministic stand-in for a chat model.
///
/// The reply is chosen by the question (text after the last `Question:`
/// line of the first user message, or that whole message) and by the number
/// of assistant messages already in the conversation: the first call of a
/// conversation gets `responses[0]`, the first correction round
/// `responses[1]`, and the last response repeats. `{{prompt}}` in a reply is
/// replaced by all message contents. Token counts are word counts.
#[derive(Debug, Clone)]
pub struct MockLlm {
    model: String,
    rules: Vec<MockRule>,
    default: Vec<MockReply>,
}

impl MockLlm {
    pub fn from_responses(responses: Vec<String>) -> Self {
        MockLlm {
            model: "mock".into(),
            rules: Vec::new(),
            default: responses.into_iter().map(MockReply::Text).collect(),
        }
    }

    pub fn from_rules(rules: Vec<MockRule>, default: Vec<MockReply>) -> Self {
        MockLlm {
            model: "mock".into(),
            rules,
            default,
        }
    }

    pub fn with_model(mut self, model: impl Into<String>) -> Self {
        self.model = model.into();
        self
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        Ok(match serde_json::from_str::<ScriptFile>(text)? {
            ScriptFile::List(default) => MockLlm {
                model: "mock".into(),
                rules: Vec::new(),
                default,
            },
            ScriptFile::Rules { model, rules, default } => MockLlm {
                model: model.unwrap_or_else(|| "mock".into()),
                rules,
                default,
            },
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, LlmError> {
        let script_err = |reason: String| LlmError::Script {
            path: path.display().to_string(),
            reason,
        };
        let text = std::fs::read_to_string(path).map_err(|e| script_err(e.to_string()))?;
        Self::from_json(&text).map_err(|e| script_err(e.to_string()))
    }

    fn question(messages: &[ChatMessage]) -> &str {
        let Some(first) = messages.iter().find(|m| m.role == Role::User) else {
            return "";
        };
        match first.content.rfind("Question:\n") {
            Some(i) => &first.content[i + "Question:\n".len()..],
            None => &first.content,
        }
    }
}

fn words(s: &str) -> u64 {
    s.split_whitespace().count() as u64
}

#[async_trait]
impl LlmClient for MockLlm {
    fn model(&self) -> &str {
        &self.model
    }

    async fn complete(&self, messages: &[ChatMessage]) -> Result<Completion, LlmError> {
        let question = Self::question(messages);
        let responses = self
            .rules
            .iter()
            .find(|r| question.contains(&r.contains))
            .map(|r| &r.responses)
            .unwrap_or(&self.default);
        let round = messages.iter().filter(|m| m.role == Role::Assistant).count();
        let reply = responses
            .get(round)
            .or_else(|| responses.last())
            .ok_or_else(|| LlmError::MalformedResponse("mock script has no response".into()))?;
        let content = match reply {
            MockReply::Fail { status, body } => {
                return Err(LlmError::Status {
                    status: *status,
                    body: body.clone(),
                })
            }
            MockReply::Text(t) if t.contains("{{prompt}}") => {
                let all: Vec<&str> = messages.iter().map(|m| m.content.as_str()).collect();
                t.replace("{{prompt}}", &all.join("\n\n"))
            }
            MockReply::Text(t) => t.clone(),
        };
        Ok(Completion {
            usage: TokenUsage {
                prompt: messages.iter().map(|m| words(&m.content)).sum(),
                completion: words(&content),
            },
            content,
            retries: 0,
        })
    }
}
