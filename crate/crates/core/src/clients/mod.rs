//! Clients for the two external models: speech transcription and chat
//! completion. Each has a remote HTTP implementation and deterministic stubs
//! so the whole pipeline runs offline.

mod asr;
mod audio;
mod extract;
mod http;
mod llm;

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use asr::{FailingTranscriber, FixtureTranscriber, RemoteTranscriber, Transcriber, TranscriptionResult};
pub use audio::{validate_wav, AudioFormat, AudioInput, WavInfo, EXPECTED_BITS, EXPECTED_CHANNELS, EXPECTED_SAMPLE_RATE};
pub use extract::extract_latex;
pub use http::{send_with_retry, RemoteEndpoint};
pub use llm::{
    ChatMessage, ChatModel, EchoLastExample, FailingChatModel, FixedResponse, NearestNeighborLatex, OpenAiCompatible,
    Role,
};

/// Upper bound on a single backoff sleep.
pub const BACKOFF_CEILING: Duration = Duration::from_secs(8);

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("unsupported audio: {0}")]
    Format(String),
    #[error("{service}: transport failure after {attempts} attempt(s): {message}")]
    Transport { service: String, attempts: u32, message: String },
    #[error("{service}: authentication rejected with HTTP {status}")]
    Auth { service: String, status: u16 },
    #[error("{service}: HTTP {status} after {attempts} attempt(s): {body}")]
    Status { service: String, status: u16, attempts: u32, body: String },
    #[error("{service}: unexpected response: {message}")]
    Decode { service: String, message: String },
    #[error("model returned an empty completion")]
    EmptyCompletion,
    #[error("no LaTeX left after stripping the reply")]
    EmptyLatex,
    #[error("{0}")]
    Stub(String),
}

impl ClientError {
    /// HTTP status carried by the error, if any.
    pub fn status(&self) -> Option<u16> {
        match self {
            ClientError::Auth { status, .. } | ClientError::Status { status, .. } => Some(*status),
            _ => None,
        }
    }
}

/// A credential that never appears in `Debug` output or logs.
#[derive(Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(transparent)]
pub struct Secret(String);

impl Secret {
    pub fn new(value: impl Into<String>) -> Self {
        Self(value.into())
    }

    pub fn expose(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Debug for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Secret(***)")
    }
}

/// Exponential backoff: the n-th retry waits `initial * 2^(n-1)`, capped at
/// `max_backoff` and never above [`BACKOFF_CEILING`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub retries: u32,
    #[serde(with = "millis")]
    pub initial_backoff: Duration,
    #[serde(with = "millis")]
    pub max_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { retries: 2, initial_backoff: Duration::from_millis(250), max_backoff: BACKOFF_CEILING }
    }
}

impl RetryPolicy {
    pub fn delay(&self, retry: u32) -> Duration {
        let factor = 2u32.saturating_pow(retry.saturating_sub(1));
        self.initial_backoff
            .saturating_mul(factor)
            .min(self.max_backoff)
            .min(BACKOFF_CEILING)
    }
}

/// Decoding parameters for chat completion. Temperature defaults to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationConfig {
    pub model_name: String,
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(with = "millis")]
    pub timeout: Duration,
    pub retries: u32,
    /// Forwarded to servers that support seeded sampling.
    pub seed: Option<u64>,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            model_name: "gpt-3.5-turbo".into(),
            temperature: 0.0,
            max_tokens: 256,
            timeout: Duration::from_secs(60),
            retries: 2,
            seed: None,
        }
    }
}

pub(crate) mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}
