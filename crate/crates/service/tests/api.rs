//! Endpoint behaviour against stub models, driven in-process.

use std::io::Write;
use std::sync::{Arc, Mutex};

use axum::body::{to_bytes, Body};
use axum::http::{header, Request, StatusCode};
use axum::Router;
use serde_json::{json, Value};
use texvox_core::clients::{FailingChatModel, FailingTranscriber, FixtureTranscriber, NearestNeighborLatex};
use texvox_core::dataset::{Dataset, EquationPair, Split};
use texvox_core::retrieval::{build_index, HashedTrigramEmbedder};
use texvox_core::{ChatModel, GenerationConfig, Transcriber};
use texvox_service::config::RequestDefaults;
use texvox_service::{router, AppState, Pipeline, ServiceConfig};
use tower::ServiceExt;

const BOUNDARY: &str = "texvox-test-boundary";

fn wav(samples: usize, seed: i16) -> Vec<u8> {
    let spec = hound::WavSpec { channels: 1, sample_rate: 16_000, bits_per_sample: 16, sample_format: hound::SampleFormat::Int };
    let mut cursor = std::io::Cursor::new(Vec::new());
    let mut w = hound::WavWriter::new(&mut cursor, spec).unwrap();
    for i in 0..samples {
        w.write_sample((i as i16 % 50).wrapping_mul(seed)).unwrap();
    }
    w.finalize().unwrap();
    cursor.into_inner()
}

fn dataset() -> Dataset {
    let rows = [
        ("p1", "άλφα συν βήτα", "\\alpha+\\beta", Split::Train),
        ("p2", "χ στο τετράγωνο", "x^{2}", Split::Train),
        ("p3", "κλάσμα ένα προς δύο", "\\frac{1}{2}", Split::Train),
        ("p4", "ρίζα του χ", "\\sqrt{x}", Split::Train),
        ("p5", "ημίτονο του θήτα", "\\sin\\theta", Split::Train),
        ("p6", "ψ ίσον δύο χ", "y=2x", Split::Test),
    ];
    Dataset::from_pairs(
        rows.iter().map(|(id, nl, l, s)| EquationPair { split: *s, ..EquationPair::new(*id, *nl, *l) }).collect(),
    )
    .unwrap()
}

/// (audio, expected transcription) pairs registered with the fixture ASR.
fn fixtures() -> Vec<(Vec<u8>, &'static str)> {
    vec![
        (wav(1600, 3), "χ στο τετράγωνο"),
        (wav(3200, 5), "άλφα συν βήτα"),
        (wav(800, 7), "ρίζα του ψ"),
    ]
}

async fn pipeline(asr: Arc<dyn Transcriber>, llm: Option<Arc<dyn ChatModel>>) -> Pipeline {
    let ds = dataset();
    let train: Vec<EquationPair> = ds.in_splits(&[Split::Train]).cloned().collect();
    let index = build_index(&train, &HashedTrigramEmbedder).await.unwrap();
    let llm = llm.unwrap_or_else(|| Arc::new(NearestNeighborLatex::new(train.iter().map(|p| (p.nl_text.clone(), p.latex.clone())))));
    Pipeline::new(ds, index, Arc::new(HashedTrigramEmbedder), asr, llm, RequestDefaults::default(), GenerationConfig::default())
        .unwrap()
}

fn fixture_asr() -> Arc<dyn Transcriber> {
    let mut asr = FixtureTranscriber::new();
    for (audio, text) in fixtures() {
        asr.register(&audio, text);
    }
    Arc::new(asr)
}

async fn app() -> Router {
    app_with(fixture_asr(), None).await
}

async fn app_with(asr: Arc<dyn Transcriber>, llm: Option<Arc<dyn ChatModel>>) -> Router {
    router(AppState::ready(pipeline(asr, llm).await), &["http://localhost:5173".to_string()]).unwrap()
}

fn multipart(audio: &[u8], fields: &[(&str, &str)]) -> Request<Body> {
    let mut body = Vec::new();
    for (name, value) in fields {
        write!(body, "--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"{name}\"\r\n\r\n{value}\r\n").unwrap();
    }
    write!(body, "--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"file\"; filename=\"rec.wav\"\r\nContent-Type: audio/wav\r\n\r\n").unwrap();
    body.extend_from_slice(audio);
    write!(body, "\r\n--{BOUNDARY}--\r\n").unwrap();
    Request::post("/api/speech-to-latex")
        .header(header::CONTENT_TYPE, format!("multipart/form-data; boundary={BOUNDARY}"))
        .body(Body::from(body))
        .unwrap()
}

fn at(mut req: Request<Body>, uri: &str) -> Request<Body> {
    *req.uri_mut() = uri.parse().unwrap();
    req
}

fn json_post(uri: &str, body: Value) -> Request<Body> {
    Request::post(uri).header(header::CONTENT_TYPE, "application/json").body(Body::from(body.to_string())).unwrap()
}

async fn call(app: &Router, req: Request<Body>) -> (StatusCode, Value) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

#[tokio::test]
async fn health_reports_index() {
    let app = app().await;
    let (s, body) = call(&app, Request::get("/health").body(Body::empty()).unwrap()).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(body["status"], "ok");
    assert_eq!(body["index_size"], 5);
    assert_eq!(body["version"], texvox_core::VERSION);
    assert_eq!(body["provider_id"], "offline-trigram-fnv1a-512/v1");
}

#[tokio::test]
async fn health_is_unavailable_while_loading() {
    let state = AppState::loading();
    let app = router(state.clone(), &[]).unwrap();
    let (s, body) = call(&app, Request::get("/health").body(Body::empty()).unwrap()).await;
    assert_eq!(s, StatusCode::SERVICE_UNAVAILABLE);
    assert!(body["error"].is_string());
    let (s, _) = call(&app, json_post("/api/generate", json!({"text": "x"}))).await;
    assert_eq!(s, StatusCode::SERVICE_UNAVAILABLE);

    state.install(pipeline(fixture_asr(), None).await);
    let (s, _) = call(&app, Request::get("/health").body(Body::empty()).unwrap()).await;
    assert_eq!(s, StatusCode::OK);
}

#[tokio::test]
async fn generate_indexed_text_returns_its_latex() {
    let app = app().await;
    let (s, body) = call(&app, json_post("/api/generate", json!({"text": "χ στο τετράγωνο", "k": 3}))).await;
    assert_eq!(s, StatusCode::OK, "{body}");
    assert_eq!(body["latex"], "x^{2}");
    assert_eq!(body["examples"][0]["pair_id"], "p2");
    assert_eq!(body["examples"].as_array().unwrap().len(), 3);
    assert_eq!(body["k"], 3);
    assert_eq!(body["measure"], "cosine");
    assert_eq!(body["prompt_id"], "p2");

    let (s, body) = call(&app, json_post("/api/generate", json!({"text": "χ στο τετράγωνο", "k": 2, "measure": "manhattan", "prompt_id": "p3"}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(body["measure"], "manhattan");
    assert_eq!(body["prompt_id"], "p3");
    assert_eq!(body["examples"][0]["pair_id"], "p2");
}

#[tokio::test]
async fn generate_baseline_and_validation() {
    let app = app().await;
    let (s, body) = call(&app, json_post("/api/generate", json!({"text": "ρίζα του χ", "k": 0}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(body["examples"], json!([]));
    assert_eq!(body["measure"], Value::Null);

    let (s, body) = call(&app, json_post("/api/generate", json!({"text": "x", "measure": "chebyshev"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let detail = body["detail"].as_str().unwrap();
    assert!(detail.contains("cosine") && detail.contains("euclidean") && detail.contains("manhattan"), "{detail}");

    for bad in [json!({"text": "  "}), json!({"text": "x", "prompt_id": "p9"}), json!({"text": "x", "k": 99}), json!({"k": 2})] {
        let (s, body) = call(&app, json_post("/api/generate", bad.clone())).await;
        assert_eq!(s, StatusCode::BAD_REQUEST, "{bad} -> {body}");
        assert!(body["error"].is_string() && body["detail"].is_string());
    }
}

#[tokio::test]
async fn transcribe_fixture_and_errors() {
    let app = app().await;
    let (audio, text) = &fixtures()[0];
    let (s, body) = call(&app, at(multipart(audio, &[]), "/api/transcribe")).await;
    assert_eq!(s, StatusCode::OK, "{body}");
    assert_eq!(body["text"], *text);
    assert!((body["duration_s"].as_f64().unwrap() - 0.1).abs() < 1e-9);

    let (s, _) = call(&app, json_post("/api/transcribe", json!({"audio": "base64"}))).await;
    assert_eq!(s, StatusCode::UNSUPPORTED_MEDIA_TYPE);
    let (s, _) = call(&app, at(multipart(b"RIFF-but-not-really", &[]), "/api/transcribe")).await;
    assert_eq!(s, StatusCode::UNSUPPORTED_MEDIA_TYPE);

    let failing = app_with(Arc::new(FailingTranscriber), None).await;
    let (s, body) = call(&failing, at(multipart(audio, &[]), "/api/transcribe")).await;
    assert_eq!(s, StatusCode::BAD_GATEWAY);
    assert_eq!(body["stage"], "transcription");
}

#[tokio::test]
async fn speech_to_latex_composes_transcribe_and_generate() {
    let app = app().await;
    for overrides in [vec![], vec![("k", "2"), ("measure", "euclidean")], vec![("k", "0"), ("prompt_id", "p1")]] {
        for (audio, _) in fixtures() {
            let (s, combined) = call(&app, multipart(&audio, &overrides)).await;
            assert_eq!(s, StatusCode::OK, "{combined}");
            let (_, t) = call(&app, at(multipart(&audio, &[]), "/api/transcribe")).await;
            let mut req = json!({"text": t["text"]});
            for (k, v) in &overrides {
                req[*k] = if *k == "k" { json!(v.parse::<usize>().unwrap()) } else { json!(v) };
            }
            let (_, g) = call(&app, json_post("/api/generate", req)).await;
            assert_eq!(combined["text"], t["text"]);
            assert_eq!(combined["latex"], g["latex"]);
            assert_eq!(combined["examples"], g["examples"]);
            // Stateless: the same request gives the same body.
            let (_, again) = call(&app, multipart(&audio, &overrides)).await;
            assert_eq!(again, combined);
        }
    }
}

#[tokio::test]
async fn speech_to_latex_names_the_failing_stage() {
    let (audio, text) = &fixtures()[1];
    let asr_down = app_with(Arc::new(FailingTranscriber), None).await;
    let (s, body) = call(&asr_down, multipart(audio, &[])).await;
    assert_eq!(s, StatusCode::BAD_GATEWAY);
    assert_eq!(body["stage"], "transcription");
    assert!(body.get("text").is_none());

    let llm_down = app_with(fixture_asr(), Some(Arc::new(FailingChatModel { status: Some(500) }))).await;
    let (s, body) = call(&llm_down, multipart(audio, &[])).await;
    assert_eq!(s, StatusCode::BAD_GATEWAY);
    assert_eq!(body["stage"], "generation");
    assert_eq!(body["text"], *text);

    let app = app().await;
    let (s, _) = call(&app, multipart(audio, &[("measure", "chebyshev")])).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn cors_allows_configured_origin_only() {
    let app = app().await;
    let req = |origin: &str| {
        Request::get("/health").header(header::ORIGIN, origin).body(Body::empty()).unwrap()
    };
    let resp = app.clone().oneshot(req("http://localhost:5173")).await.unwrap();
    assert_eq!(resp.headers()[header::ACCESS_CONTROL_ALLOW_ORIGIN], "http://localhost:5173");
    let resp = app.clone().oneshot(req("http://evil.example")).await.unwrap();
    assert!(resp.headers().get(header::ACCESS_CONTROL_ALLOW_ORIGIN).is_none());
}

#[derive(Clone, Default)]
struct Capture(Arc<Mutex<Vec<u8>>>);

impl Write for Capture {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.0.lock().unwrap().extend_from_slice(buf);
        Ok(buf.len())
    }
    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

#[tokio::test]
async fn credentials_never_reach_the_logs() {
    const SENTINEL: &str = "sk-SENTINEL-7f3a9c1e";
    let capture = Capture::default();
    let writer = capture.clone();
    let subscriber = tracing_subscriber::fmt()
        .with_max_level(tracing::Level::TRACE)
        .with_writer(move || writer.clone())
        .with_ansi(false)
        .finish();
    let _guard = tracing::subscriber::set_default(subscriber);

    let dir = tempfile::tempdir().unwrap();
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let ds = dataset();
    texvox_core::dataset::write_dataset(&ds, dir.path().join("pairs.jsonl")).unwrap();
    let train: Vec<EquationPair> = ds.in_splits(&[Split::Train]).cloned().collect();
    build_index(&train, &HashedTrigramEmbedder).await.unwrap().save(dir.path().join("index.json")).unwrap();
    std::fs::write(
        dir.path().join("service.toml"),
        format!(
            r#"
dataset = "pairs.jsonl"
index = "index.json"

[retry]
retries = 1
initial_backoff = 1
max_backoff = 1

[llm]
kind = "remote"
base_url = "http://127.0.0.1:{port}/v1"
api_key = "{SENTINEL}"

[asr]
kind = "remote"
base_url = "http://127.0.0.1:{port}/v1"
api_key = "{SENTINEL}"
"#
        ),
    )
    .unwrap();
    let config = ServiceConfig::load(dir.path().join("service.toml")).unwrap();
    tracing::info!(?config, "loaded config");
    let pipeline = Pipeline::load(&config).unwrap();
    let app = router(AppState::ready(pipeline), &config.cors_origins).unwrap();

    let (s, body) = call(&app, json_post("/api/generate", json!({"text": "χ στο τετράγωνο"}))).await;
    assert_eq!(s, StatusCode::BAD_GATEWAY);
    assert!(!body.to_string().contains(SENTINEL));
    let (s, body) = call(&app, multipart(&fixtures()[0].0, &[])).await;
    assert_eq!(s, StatusCode::BAD_GATEWAY);
    assert!(!body.to_string().contains(SENTINEL));

    let logs = String::from_utf8(capture.0.lock().unwrap().clone()).unwrap();
    assert!(logs.contains("loaded config") && logs.contains("request failed"), "capture is live:\n{logs}");
    assert!(!logs.contains(SENTINEL), "credential leaked:\n{logs}");
}
