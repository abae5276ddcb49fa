//! HTTP service: transcription, equation generation and the combined
//! speech-to-LaTeX flow consumed by the browser UI.

mod api;
pub mod config;
mod pipeline;

use thiserror::Error;
use tokio::net::TcpListener;
use tracing::{error, info};

pub use api::{router, AppState, ErrorBody, ExampleRef, GenerateRequest, GenerateResponse, SpeechResponse, TranscribeResponse};
pub use config::ServiceConfig;
pub use pipeline::{Overrides, Pipeline};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("startup: {0}")]
    Startup(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Binds, starts answering `/health` with 503, loads the corpus and index,
/// then serves until ctrl-c.
pub async fn serve(config: ServiceConfig) -> Result<(), ServiceError> {
    let listener = TcpListener::bind(&config.listen).await?;
    info!(addr = %listener.local_addr()?, "listening");
    let state = AppState::loading();
    let app = router(state.clone(), &config.cors_origins)?;
    let server = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    });
    match Pipeline::load(&config) {
        Ok(p) => {
            info!(index_size = p.index().len(), provider = p.index().provider_id(), "ready");
            state.install(p);
        }
        Err(e) => {
            error!(error = %e, "startup failed");
            server.abort();
            return Err(e);
        }
    }
    server.await.map_err(|e| ServiceError::Startup(e.to_string()))??;
    Ok(())
}
