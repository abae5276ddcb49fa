use std::sync::{Arc, OnceLock};

use axum::extract::multipart::MultipartRejection;
use axum::extract::rejection::JsonRejection;
use axum::extract::{DefaultBodyLimit, Multipart, State};
use axum::http::{HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use texvox_core::{Measure, PromptId};
use tower_http::cors::{AllowHeaders, CorsLayer};
use tracing::warn;

use crate::pipeline::{Failure, Generated, Overrides, Pipeline};
use crate::ServiceError;

/// Roughly ten minutes of 16 kHz mono PCM-16.
const MAX_UPLOAD: usize = 20 * 1024 * 1024;

/// Shared handle; empty until the pipeline has loaded.
#[derive(Clone, Default)]
pub struct AppState {
    pipeline: Arc<OnceLock<Arc<Pipeline>>>,
}

impl AppState {
    pub fn loading() -> Self {
        Self::default()
    }

    pub fn ready(pipeline: Pipeline) -> Self {
        let s = Self::default();
        s.install(pipeline);
        s
    }

    /// Later calls are ignored.
    pub fn install(&self, pipeline: Pipeline) {
        let _ = self.pipeline.set(Arc::new(pipeline));
    }

    fn get(&self) -> Result<Arc<Pipeline>, ApiError> {
        self.pipeline.get().cloned().ok_or_else(|| ApiError {
            status: StatusCode::SERVICE_UNAVAILABLE,
            body: ErrorBody::new("service is starting", None, "dataset and index are still loading"),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<String>,
    pub detail: String,
    /// The transcription, when speech-to-latex failed after it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

impl ErrorBody {
    fn new(error: &str, stage: Option<&str>, detail: impl Into<String>) -> Self {
        Self { error: error.into(), stage: stage.map(String::from), detail: detail.into(), text: None }
    }
}

#[derive(Debug)]
struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn bad_request(detail: impl Into<String>) -> Self {
        Self { status: StatusCode::BAD_REQUEST, body: ErrorBody::new("invalid request", None, detail) }
    }

    fn unsupported(detail: impl Into<String>) -> Self {
        Self {
            status: StatusCode::UNSUPPORTED_MEDIA_TYPE,
            body: ErrorBody::new("unsupported media type", Some("transcription"), detail),
        }
    }

    fn with_text(mut self, text: &str) -> Self {
        self.body.text = Some(text.to_owned());
        self
    }
}

impl From<Failure> for ApiError {
    fn from(f: Failure) -> Self {
        let (status, error, stage, detail) = match f {
            Failure::BadRequest(d) => (StatusCode::BAD_REQUEST, "invalid request", None, d),
            Failure::UnsupportedAudio(d) => {
                (StatusCode::UNSUPPORTED_MEDIA_TYPE, "unsupported media type", Some("transcription"), d)
            }
            Failure::Transcription(d) => (StatusCode::BAD_GATEWAY, "transcription failed", Some("transcription"), d),
            Failure::Generation(d) => (StatusCode::BAD_GATEWAY, "generation failed", Some("generation"), d),
        };
        Self { status, body: ErrorBody::new(error, stage, detail) }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            warn!(status = self.status.as_u16(), stage = ?self.body.stage, detail = %self.body.detail, "request failed");
        }
        (self.status, Json(self.body)).into_response()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub version: String,
    pub index_size: usize,
    pub provider_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscribeResponse {
    pub text: String,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct GenerateRequest {
    pub text: String,
    #[serde(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleRef {
    pub pair_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateResponse {
    pub latex: String,
    pub examples: Vec<ExampleRef>,
    pub prompt_id: PromptId,
    pub k: usize,
    pub measure: Option<Measure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeechResponse {
    pub text: String,
    pub latex: String,
    pub examples: Vec<ExampleRef>,
}

fn examples(g: &Generated) -> Vec<ExampleRef> {
    g.examples.iter().map(|(id, s)| ExampleRef { pair_id: id.clone(), score: *s }).collect()
}

pub fn router(state: AppState, cors_origins: &[String]) -> Result<Router, ServiceError> {
    let origins = cors_origins
        .iter()
        .map(|o| HeaderValue::from_str(o).map_err(|_| ServiceError::Config(format!("bad CORS origin `{o}`"))))
        .collect::<Result<Vec<_>, _>>()?;
    let cors = CorsLayer::new()
        .allow_origin(origins)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers(AllowHeaders::list([axum::http::header::CONTENT_TYPE]));
    Ok(Router::new()
        .route("/health", get(health))
        .route("/api/transcribe", post(transcribe))
        .route("/api/generate", post(generate))
        .route("/api/speech-to-latex", post(speech_to_latex))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD))
        .layer(cors)
        .with_state(state))
}

async fn health(State(state): State<AppState>) -> Result<Json<Health>, ApiError> {
    let p = state.get()?;
    Ok(Json(Health {
        status: "ok".into(),
        version: texvox_core::VERSION.into(),
        index_size: p.index().len(),
        provider_id: p.index().provider_id().into(),
    }))
}

/// The audio part plus any text fields.
struct Upload {
    audio: Vec<u8>,
    overrides: Overrides,
}

async fn read_upload(form: Result<Multipart, MultipartRejection>) -> Result<Upload, ApiError> {
    let mut form = form.map_err(|e| ApiError::unsupported(format!("expected multipart/form-data with a WAV file: {e}")))?;
    let mut audio = None;
    let mut overrides = Overrides::default();
    let bad = |e: axum::extract::multipart::MultipartError| ApiError::bad_request(e.body_text());
    while let Some(field) = form.next_field().await.map_err(bad)? {
        let name = field.name().unwrap_or_default().to_owned();
        let is_file = field.file_name().is_some();
        match name.as_str() {
            "k" => {
                let v = field.text().await.map_err(bad)?;
                let k = v.trim().parse().map_err(|_| ApiError::bad_request(format!("k must be an integer, got `{v}`")))?;
                overrides.k = Some(k);
            }
            "measure" => overrides.measure = Some(field.text().await.map_err(bad)?.trim().to_owned()),
            "prompt_id" => overrides.prompt_id = Some(field.text().await.map_err(bad)?.trim().to_owned()),
            "file" | "audio" => audio = Some(field.bytes().await.map_err(bad)?.to_vec()),
            _ if is_file && audio.is_none() => audio = Some(field.bytes().await.map_err(bad)?.to_vec()),
            _ => {}
        }
    }
    let audio = audio.ok_or_else(|| ApiError::unsupported("no audio part (field `file`) in the upload"))?;
    Ok(Upload { audio, overrides })
}

async fn transcribe(
    State(state): State<AppState>,
    form: Result<Multipart, MultipartRejection>,
) -> Result<Json<TranscribeResponse>, ApiError> {
    let p = state.get()?;
    let upload = read_upload(form).await?;
    let t = p.transcribe(upload.audio).await?;
    Ok(Json(TranscribeResponse { text: t.text, duration_s: t.audio_duration }))
}

async fn generate(
    State(state): State<AppState>,
    body: Result<Json<GenerateRequest>, JsonRejection>,
) -> Result<Json<GenerateResponse>, ApiError> {
    let p = state.get()?;
    let Json(req) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let g = p.generate(&req.text, &req.overrides).await?;
    Ok(Json(GenerateResponse {
        latex: g.latex.clone(),
        examples: examples(&g),
        prompt_id: g.resolved.prompt_id,
        k: g.resolved.k,
        measure: g.resolved.measure,
    }))
}

async fn speech_to_latex(
    State(state): State<AppState>,
    form: Result<Multipart, MultipartRejection>,
) -> Result<Json<SpeechResponse>, ApiError> {
    let p = state.get()?;
    let upload = read_upload(form).await?;
    // Reject bad overrides before spending an ASR call.
    p.resolve(&upload.overrides)?;
    let t = p.transcribe(upload.audio).await?;
    let g = match p.generate(&t.text, &upload.overrides).await {
        Ok(g) => g,
        Err(f) => {
            let mut e = ApiError::from(f);
            e.body.stage = Some("generation".into());
            return Err(e.with_text(&t.text));
        }
    };
    Ok(Json(SpeechResponse { text: t.text, latex: g.latex.clone(), examples: examples(&g) }))
}
