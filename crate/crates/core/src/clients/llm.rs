use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use tracing::debug;

use super::http::{send_with_retry, RemoteEndpoint};
use super::{ClientError, GenerationConfig, RetryPolicy};
use crate::prompting::AssembledPrompt;
use crate::retrieval::{cosine, HashedTrigramEmbedder};

pub use crate::prompting::{ChatMessage, Role};

#[async_trait]
pub trait ChatModel: Send + Sync {
    fn id(&self) -> &str;

    /// The raw completion text.
    async fn complete(&self, prompt: &AssembledPrompt, config: &GenerationConfig) -> Result<String, ClientError>;

    /// [`complete`](Self::complete), rejecting blank replies.
    async fn generate(&self, prompt: &AssembledPrompt, config: &GenerationConfig) -> Result<String, ClientError> {
        let raw = self.complete(prompt, config).await?;
        if raw.trim().is_empty() {
            return Err(ClientError::EmptyCompletion);
        }
        Ok(raw)
    }
}

/// Replies with the LaTeX of the example placed right before the query.
#[derive(Debug, Clone, Copy, Default)]
pub struct EchoLastExample;

#[async_trait]
impl ChatModel for EchoLastExample {
    fn id(&self) -> &str {
        "echo"
    }

    async fn complete(&self, prompt: &AssembledPrompt, _: &GenerationConfig) -> Result<String, ClientError> {
        Ok(prompt.example_turns.last().map(|e| e.latex.clone()).unwrap_or_default())
    }
}

/// Replies with the same text for every prompt.
#[derive(Debug, Clone)]
pub struct FixedResponse(pub String);

#[async_trait]
impl ChatModel for FixedResponse {
    fn id(&self) -> &str {
        "fixed"
    }

    async fn complete(&self, _: &AssembledPrompt, _: &GenerationConfig) -> Result<String, ClientError> {
        Ok(self.0.clone())
    }
}

/// Replies with the LaTeX of the corpus entry whose description is closest
/// to the query: an exact text match if there is one, otherwise the highest
/// offline-embedding cosine, earliest entry on ties.
#[derive(Debug, Clone)]
pub struct NearestNeighborLatex {
    entries: Vec<(String, String)>,
    embedder: HashedTrigramEmbedder,
}

impl NearestNeighborLatex {
    pub fn new(entries: impl IntoIterator<Item = (String, String)>) -> Self {
        Self { entries: entries.into_iter().collect(), embedder: HashedTrigramEmbedder::default() }
    }

    fn lookup(&self, query: &str) -> Option<&str> {
        if let Some((_, latex)) = self.entries.iter().find(|(nl, _)| nl == query) {
            return Some(latex);
        }
        let q = self.embedder.embed_text(query).ok()?;
        let mut best: Option<(f64, &str)> = None;
        for (nl, latex) in &self.entries {
            let Ok(v) = self.embedder.embed_text(nl) else { continue };
            let Ok(score) = cosine(&q, &v) else { continue };
            if best.is_none_or(|(b, _)| score > b) {
                best = Some((score, latex));
            }
        }
        best.map(|(_, l)| l)
    }
}

#[async_trait]
impl ChatModel for NearestNeighborLatex {
    fn id(&self) -> &str {
        "nearest-neighbor"
    }

    async fn complete(&self, prompt: &AssembledPrompt, _: &GenerationConfig) -> Result<String, ClientError> {
        Ok(self.lookup(&prompt.query_text).unwrap_or_default().to_owned())
    }
}

/// Fails every call, either with an HTTP status or a transport error.
#[derive(Debug, Clone, Default)]
pub struct FailingChatModel {
    pub status: Option<u16>,
}

#[async_trait]
impl ChatModel for FailingChatModel {
    fn id(&self) -> &str {
        "failing"
    }

    async fn complete(&self, _: &AssembledPrompt, _: &GenerationConfig) -> Result<String, ClientError> {
        Err(match self.status {
            Some(status) => ClientError::Status { service: "failing-llm".into(), status, attempts: 1, body: String::new() },
            None => ClientError::Transport { service: "failing-llm".into(), attempts: 1, message: "injected failure".into() },
        })
    }
}

/// Chat-completion client for any server speaking the
/// `POST <base_url>/chat/completions` JSON protocol.
#[derive(Debug, Clone)]
pub struct OpenAiCompatible {
    endpoint: RemoteEndpoint,
    policy: RetryPolicy,
    client: reqwest::Client,
}

impl OpenAiCompatible {
    pub fn new(endpoint: RemoteEndpoint, policy: RetryPolicy) -> Self {
        let client = endpoint.client();
        Self { endpoint, policy, client }
    }
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage>,
    temperature: f64,
    max_tokens: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ReplyMessage,
}

#[derive(Deserialize)]
struct ReplyMessage {
    #[serde(default)]
    content: Option<String>,
}

#[async_trait]
impl ChatModel for OpenAiCompatible {
    fn id(&self) -> &str {
        "remote-llm"
    }

    async fn complete(&self, prompt: &AssembledPrompt, config: &GenerationConfig) -> Result<String, ClientError> {
        let url = self.endpoint.url("chat/completions");
        let body = ChatRequest {
            model: &config.model_name,
            messages: prompt.messages(),
            temperature: config.temperature,
            max_tokens: config.max_tokens,
            seed: config.seed,
        };
        debug!(url, body = %serde_json::to_string(&body).unwrap_or_default(), "chat request");
        let policy = RetryPolicy { retries: config.retries, ..self.policy };
        let resp = send_with_retry("llm", policy, || {
            self.endpoint.authorize(self.client.post(&url)).timeout(config.timeout).json(&body)
        })
        .await?;
        let decoded: ChatResponse = resp
            .json()
            .await
            .map_err(|e| ClientError::Decode { service: "llm".into(), message: e.to_string() })?;
        let text = decoded
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .unwrap_or_default();
        debug!(reply = %text, "chat response");
        Ok(text)
    }
}
