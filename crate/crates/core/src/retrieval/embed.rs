use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::{EmbeddingVector, RetrievalError};
use crate::clients::{send_with_retry, ClientError, RemoteEndpoint, RetryPolicy};

#[async_trait]
pub trait EmbeddingProvider: Send + Sync {
    /// Identifies the provider and its version; stored in every index it builds.
    fn provider_id(&self) -> &str;

    fn dim(&self) -> usize;

    /// Deterministic for a given provider and text. Empty text is rejected.
    async fn embed(&self, text: &str) -> Result<EmbeddingVector, RetrievalError>;
}

pub const OFFLINE_DIM: usize = 512;
pub const OFFLINE_PROVIDER_ID: &str = "offline-trigram-fnv1a-512/v1";

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a over bytes.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, b| (h ^ u64::from(*b)).wrapping_mul(FNV_PRIME))
}

/// Network-free embedding: hashed character-trigram term frequencies.
///
/// The text is lowercased, trimmed, and internal whitespace runs collapse to
/// one space. It is then padded as `##text##` and every window of three
/// characters is hashed with 64-bit FNV-1a over its UTF-8 bytes; the hash
/// modulo 512 selects the bucket whose count is incremented. The count vector
/// is scaled to unit L2 norm. `"a"` yields the trigrams `##a`, `#a#`, `a##`.
#[derive(Debug, Clone, Copy, Default)]
pub struct HashedTrigramEmbedder;

impl HashedTrigramEmbedder {
    pub fn prepare(text: &str) -> String {
        let collapsed = text.split_whitespace().collect::<Vec<_>>().join(" ");
        format!("##{}##", collapsed.to_lowercase())
    }

    pub fn trigrams(text: &str) -> Vec<String> {
        let chars: Vec<char> = Self::prepare(text).chars().collect();
        chars.windows(3).map(|w| w.iter().collect()).collect()
    }

    pub fn bucket(trigram: &str) -> usize {
        (fnv1a64(trigram.as_bytes()) % OFFLINE_DIM as u64) as usize
    }

    pub fn embed_text(&self, text: &str) -> Result<EmbeddingVector, RetrievalError> {
        if text.trim().is_empty() {
            return Err(RetrievalError::EmptyText);
        }
        let mut counts = vec![0.0f64; OFFLINE_DIM];
        for gram in Self::trigrams(text) {
            counts[Self::bucket(&gram)] += 1.0;
        }
        let norm = counts.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in &mut counts {
            *x /= norm;
        }
        EmbeddingVector::new(counts)
    }
}

#[async_trait]
impl EmbeddingProvider for HashedTrigramEmbedder {
    fn provider_id(&self) -> &str {
        OFFLINE_PROVIDER_ID
    }

    fn dim(&self) -> usize {
        OFFLINE_DIM
    }

    async fn embed(&self, text: &str) -> Result<EmbeddingVector, RetrievalError> {
        self.embed_text(text)
    }
}

/// Calls `POST <base_url>/embeddings` with `{"model", "input"}` and reads
/// `data[0].embedding`.
#[derive(Debug, Clone)]
pub struct RemoteEmbedder {
    endpoint: RemoteEndpoint,
    model: String,
    dim: usize,
    provider_id: String,
    policy: RetryPolicy,
    client: reqwest::Client,
}

impl RemoteEmbedder {
    pub fn new(endpoint: RemoteEndpoint, model: impl Into<String>, dim: usize, policy: RetryPolicy) -> Self {
        let model = model.into();
        let client = endpoint.client();
        Self { provider_id: format!("remote:{model}"), endpoint, model, dim, policy, client }
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    input: &'a str,
}

#[derive(Deserialize)]
struct EmbedResponse {
    data: Vec<EmbedDatum>,
}

#[derive(Deserialize)]
struct EmbedDatum {
    embedding: Vec<f64>,
}

#[async_trait]
impl EmbeddingProvider for RemoteEmbedder {
    fn provider_id(&self) -> &str {
        &self.provider_id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    async fn embed(&self, text: &str) -> Result<EmbeddingVector, RetrievalError> {
        if text.trim().is_empty() {
            return Err(RetrievalError::EmptyText);
        }
        let url = self.endpoint.url("embeddings");
        let body = EmbedRequest { model: &self.model, input: text };
        let wrap = |source: ClientError| RetrievalError::Provider { provider_id: self.provider_id.clone(), source };
        let resp = send_with_retry("embedding", self.policy, || {
            self.endpoint.authorize(self.client.post(&url)).json(&body)
        })
        .await
        .map_err(wrap)?;
        let decoded: EmbedResponse = resp
            .json()
            .await
            .map_err(|e| wrap(ClientError::Decode { service: "embedding".into(), message: e.to_string() }))?;
        let values = decoded
            .data
            .into_iter()
            .next()
            .ok_or_else(|| wrap(ClientError::Decode { service: "embedding".into(), message: "no data".into() }))?
            .embedding;
        if values.len() != self.dim {
            return Err(RetrievalError::DimMismatch { expected: self.dim, got: values.len() });
        }
        EmbeddingVector::new(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_values() {
        // Standard FNV-1a 64 test vectors.
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn single_letter_buckets() {
        assert_eq!(HashedTrigramEmbedder::trigrams("a"), ["##a", "#a#", "a##"]);
        let v = HashedTrigramEmbedder.embed_text("a").unwrap();
        let mut expected: Vec<usize> = ["##a", "#a#", "a##"].iter().map(|g| HashedTrigramEmbedder::bucket(g)).collect();
        expected.sort_unstable();
        expected.dedup();
        let nonzero: Vec<usize> = (0..OFFLINE_DIM).filter(|&i| v.values()[i] != 0.0).collect();
        assert_eq!(nonzero, expected);
    }

    #[test]
    fn deterministic_and_normalized() {
        let a = HashedTrigramEmbedder.embed_text("άλφα συν βήτα").unwrap();
        let b = HashedTrigramEmbedder.embed_text("  ΆΛΦΑ   συν βήτα ").unwrap();
        assert_eq!(a, b);
        let norm: f64 = a.values().iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        assert_eq!(a.dim(), OFFLINE_DIM);
    }

    #[test]
    fn empty_rejected() {
        assert!(matches!(HashedTrigramEmbedder.embed_text(" "), Err(RetrievalError::EmptyText)));
    }
}
