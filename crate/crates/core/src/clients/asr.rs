use std::collections::HashMap;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tracing::{debug, warn};

use super::audio::{validate_wav, AudioFormat, AudioInput};
use super::http::{send_with_retry, RemoteEndpoint};
use super::{ClientError, RetryPolicy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptionResult {
    pub text: String,
    pub audio_duration: f64,
}

impl TranscriptionResult {
    /// Empty transcriptions are passed through and flagged here rather than failing.
    pub fn is_empty(&self) -> bool {
        self.text.trim().is_empty()
    }
}

#[async_trait]
pub trait Transcriber: Send + Sync {
    fn id(&self) -> &str;

    /// Transcribes audio that already passed [`validate_wav`].
    async fn transcribe_validated(&self, audio: &AudioInput, duration_s: f64) -> Result<TranscriptionResult, ClientError>;

    /// Validates the WAV contract, then transcribes.
    async fn transcribe(&self, audio: &AudioInput) -> Result<TranscriptionResult, ClientError> {
        let AudioFormat::Wav = audio.format;
        let info = validate_wav(&audio.bytes)?;
        let result = self.transcribe_validated(audio, info.duration_s).await?;
        if result.is_empty() {
            warn!(client = self.id(), "empty transcription");
        }
        Ok(result)
    }
}

/// Returns registered texts keyed by the SHA-256 of the audio bytes.
#[derive(Debug, Clone, Default)]
pub struct FixtureTranscriber {
    by_digest: HashMap<String, String>,
}

impl FixtureTranscriber {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn digest(bytes: &[u8]) -> String {
        hex::encode(Sha256::digest(bytes))
    }

    pub fn register(&mut self, audio: &[u8], text: impl Into<String>) -> &mut Self {
        self.by_digest.insert(Self::digest(audio), text.into());
        self
    }

    /// Builds from a digest → text map, as stored in fixture files.
    pub fn from_digests(map: HashMap<String, String>) -> Self {
        Self { by_digest: map }
    }
}

#[async_trait]
impl Transcriber for FixtureTranscriber {
    fn id(&self) -> &str {
        "fixture"
    }

    async fn transcribe_validated(&self, audio: &AudioInput, duration_s: f64) -> Result<TranscriptionResult, ClientError> {
        let digest = Self::digest(&audio.bytes);
        self.by_digest
            .get(&digest)
            .map(|text| TranscriptionResult { text: text.clone(), audio_duration: duration_s })
            .ok_or_else(|| ClientError::Stub(format!("no fixture transcription registered for audio {digest}")))
    }
}

/// Always fails with a transport error; used to exercise error paths.
#[derive(Debug, Clone, Default)]
pub struct FailingTranscriber;

#[async_trait]
impl Transcriber for FailingTranscriber {
    fn id(&self) -> &str {
        "failing"
    }

    async fn transcribe_validated(&self, _: &AudioInput, _: f64) -> Result<TranscriptionResult, ClientError> {
        Err(ClientError::Transport { service: "failing-asr".into(), attempts: 1, message: "injected failure".into() })
    }
}

/// Posts the WAV as multipart field `file` to `<base_url>/transcribe` and
/// reads `{"text": ...}` back.
#[derive(Debug, Clone)]
pub struct RemoteTranscriber {
    endpoint: RemoteEndpoint,
    policy: RetryPolicy,
    client: reqwest::Client,
}

impl RemoteTranscriber {
    pub fn new(endpoint: RemoteEndpoint, policy: RetryPolicy) -> Self {
        let client = endpoint.client();
        Self { endpoint, policy, client }
    }
}

#[derive(Deserialize)]
struct TranscribeResponse {
    text: String,
}

#[async_trait]
impl Transcriber for RemoteTranscriber {
    fn id(&self) -> &str {
        "remote-asr"
    }

    async fn transcribe_validated(&self, audio: &AudioInput, duration_s: f64) -> Result<TranscriptionResult, ClientError> {
        let url = self.endpoint.url("transcribe");
        debug!(url, bytes = audio.bytes.len(), "transcription request");
        let resp = send_with_retry("asr", self.policy, || {
            let part = reqwest::multipart::Part::bytes(audio.bytes.clone())
                .file_name("audio.wav")
                .mime_str("audio/wav")
                .expect("static mime parses");
            let form = reqwest::multipart::Form::new().part("file", part);
            self.endpoint.authorize(self.client.post(&url)).multipart(form)
        })
        .await?;
        let body: TranscribeResponse = resp
            .json()
            .await
            .map_err(|e| ClientError::Decode { service: "asr".into(), message: e.to_string() })?;
        Ok(TranscriptionResult { text: body.text, audio_duration: duration_s })
    }
}
