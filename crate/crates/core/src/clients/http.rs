use std::time::Duration;

use serde::Deserialize;
use tracing::{debug, warn};

use super::{ClientError, RetryPolicy, Secret};

/// Base URL and credential for one remote model service.
#[derive(Debug, Clone, Deserialize)]
pub struct RemoteEndpoint {
    pub base_url: String,
    #[serde(default)]
    pub api_key: Secret,
    #[serde(default, with = "super::millis")]
    pub timeout: Duration,
}

impl RemoteEndpoint {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self { base_url: base_url.into(), api_key: Secret::default(), timeout: Duration::from_secs(60) }
    }

    pub fn with_key(mut self, key: Secret) -> Self {
        self.api_key = key;
        self
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}/{}", self.base_url.trim_end_matches('/'), path.trim_start_matches('/'))
    }

    pub(crate) fn client(&self) -> reqwest::Client {
        let timeout = if self.timeout.is_zero() { Duration::from_secs(60) } else { self.timeout };
        reqwest::Client::builder().timeout(timeout).build().expect("http client builds")
    }

    pub(crate) fn authorize(&self, req: reqwest::RequestBuilder) -> reqwest::RequestBuilder {
        if self.api_key.is_empty() {
            req
        } else {
            req.bearer_auth(self.api_key.expose())
        }
    }
}

/// Sends the request built by `build` until it succeeds.
///
/// 2xx responses are returned. 401 and 403 become [`ClientError::Auth`] and
/// other 4xx become [`ClientError::Status`], both without retrying. 5xx
/// responses, timeouts and connection failures are retried `policy.retries`
/// times with exponential backoff.
pub async fn send_with_retry(
    service: &str,
    policy: RetryPolicy,
    build: impl Fn() -> reqwest::RequestBuilder,
) -> Result<reqwest::Response, ClientError> {
    let max_attempts = policy.retries + 1;
    let mut attempt = 0;
    loop {
        attempt += 1;
        let outcome = build().send().await;
        let retryable = match outcome {
            Ok(resp) if resp.status().is_success() => {
                debug!(service, attempt, status = resp.status().as_u16(), "request succeeded");
                return Ok(resp);
            }
            Ok(resp) => {
                let status = resp.status().as_u16();
                let body = resp.text().await.unwrap_or_default();
                if status == 401 || status == 403 {
                    return Err(ClientError::Auth { service: service.into(), status });
                }
                let err = ClientError::Status { service: service.into(), status, attempts: attempt, body };
                if status < 500 {
                    return Err(err);
                }
                err
            }
            Err(e) => ClientError::Transport { service: service.into(), attempts: attempt, message: e.to_string() },
        };
        if attempt >= max_attempts {
            return Err(retryable);
        }
        let delay = policy.delay(attempt);
        warn!(service, attempt, ?delay, error = %retryable, "retrying");
        tokio::time::sleep(delay).await;
    }
}
