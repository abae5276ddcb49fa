//! Exhaustive k-nearest-neighbour search over embedded equation descriptions.
//!
//! Three measures are supported: cosine similarity (higher is closer),
//! Euclidean and Manhattan distance (lower is closer). Every query scans the
//! whole index; ties keep index order.

mod embed;

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clients::ClientError;
use crate::dataset::EquationPair;

pub use embed::{fnv1a64, EmbeddingProvider, HashedTrigramEmbedder, RemoteEmbedder, OFFLINE_DIM, OFFLINE_PROVIDER_ID};

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("vector dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("cosine is undefined for a zero-norm vector")]
    ZeroNorm,
    #[error("embedding values must be finite")]
    NonFinite,
    #[error("embedding vectors must have at least one dimension")]
    ZeroDim,
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("cannot build an index from zero pairs")]
    EmptyIndex,
    #[error("duplicate pair id `{0}` in index")]
    DuplicateId(String),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("index was built by `{index}` but the query provider is `{provider}`")]
    ProviderMismatch { index: String, provider: String },
    #[error("embedding pair `{pair_id}` failed: {source}")]
    EmbedFailed {
        pair_id: String,
        #[source]
        source: Box<RetrievalError>,
    },
    #[error("embedding provider `{provider_id}` failed: {source}")]
    Provider {
        provider_id: String,
        #[source]
        source: ClientError,
    },
    #[error("unknown measure `{0}` (allowed: cosine, euclidean, manhattan)")]
    UnknownMeasure(String),
    #[error("index file {path}: {message}")]
    File { path: String, message: String },
}

/// A finite, non-empty real vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, RetrievalError> {
        if values.is_empty() {
            return Err(RetrievalError::ZeroDim);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(RetrievalError::NonFinite);
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn l2_norm(&self) -> f64 {
        norm(&self.0)
    }
}

impl<'de> Deserialize<'de> for EmbeddingVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        EmbeddingVector::new(Vec::<f64>::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

fn check_dims(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<(), RetrievalError> {
    if u.dim() != v.dim() {
        return Err(RetrievalError::DimMismatch { expected: u.dim(), got: v.dim() });
    }
    Ok(())
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn norm(u: &[f64]) -> f64 {
    u.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// `dot(u, v) / (|u| |v|)`.
pub fn cosine(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64, RetrievalError> {
    check_dims(u, v)?;
    let (nu, nv) = (u.l2_norm(), v.l2_norm());
    if nu == 0.0 || nv == 0.0 {
        return Err(RetrievalError::ZeroNorm);
    }
    Ok(dot(&u.0, &v.0) / (nu * nv))
}

pub fn euclidean(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64, RetrievalError> {
    check_dims(u, v)?;
    Ok(u.0.iter().zip(&v.0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
}

pub fn manhattan(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64, RetrievalError> {
    check_dims(u, v)?;
    Ok(u.0.iter().zip(&v.0).map(|(a, b)| (a - b).abs()).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Cosine,
    Euclidean,
    Manhattan,
}

impl Measure {
    pub const ALL: [Measure; 3] = [Measure::Cosine, Measure::Euclidean, Measure::Manhattan];

    /// True when larger scores mean closer.
    pub fn is_similarity(self) -> bool {
        matches!(self, Measure::Cosine)
    }

    pub fn score(self, u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64, RetrievalError> {
        match self {
            Measure::Cosine => cosine(u, v),
            Measure::Euclidean => euclidean(u, v),
            Measure::Manhattan => manhattan(u, v),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Measure::Cosine => "cosine",
            Measure::Euclidean => "euclidean",
            Measure::Manhattan => "manhattan",
        }
    }

    /// Capitalized name as shown in results tables.
    pub fn label(self) -> &'static str {
        match self {
            Measure::Cosine => "Cosine",
            Measure::Euclidean => "Euclidean",
            Measure::Manhattan => "Manhattan",
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Measure {
    type Err = RetrievalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cosine" => Ok(Measure::Cosine),
            "euclidean" => Ok(Measure::Euclidean),
            "manhattan" => Ok(Measure::Manhattan),
            _ => Err(RetrievalError::UnknownMeasure(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub id: String,
    pub values: EmbeddingVector,
}

/// Embedded corpus entries from one provider. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Index {
    provider_id: String,
    dim: usize,
    entries: Vec<IndexEntry>,
}

#[derive(Deserialize)]
struct IndexFile {
    provider_id: String,
    dim: usize,
    entries: Vec<IndexEntry>,
}

impl Index {
    pub fn new(provider_id: impl Into<String>, dim: usize, entries: Vec<IndexEntry>) -> Result<Self, RetrievalError> {
        if entries.is_empty() {
            return Err(RetrievalError::EmptyIndex);
        }
        let mut seen = HashSet::with_capacity(entries.len());
        for e in &entries {
            if !seen.insert(e.id.as_str()) {
                return Err(RetrievalError::DuplicateId(e.id.clone()));
            }
            if e.values.dim() != dim {
                return Err(RetrievalError::DimMismatch { expected: dim, got: e.values.dim() });
            }
        }
        Ok(Self { provider_id: provider_id.into(), dim, entries })
    }

    pub fn provider_id(&self) -> &str {
        &self.provider_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.id.as_str())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RetrievalError> {
        let path = path.as_ref();
        let fail = |message: String| RetrievalError::File { path: path.display().to_string(), message };
        let file = File::open(path).map_err(|e| fail(e.to_string()))?;
        let raw: IndexFile = serde_json::from_reader(BufReader::new(file)).map_err(|e| fail(e.to_string()))?;
        Index::new(raw.provider_id, raw.dim, raw.entries)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RetrievalError> {
        let path = path.as_ref();
        let fail = |message: String| RetrievalError::File { path: path.display().to_string(), message };
        let file = File::create(path).map_err(|e| fail(e.to_string()))?;
        let mut out = BufWriter::new(file);
        serde_json::to_writer(&mut out, self).map_err(|e| fail(e.to_string()))?;
        out.write_all(b"\n").and_then(|_| out.flush()).map_err(|e| fail(e.to_string()))
    }

    /// Top-`k` entries for an already-embedded query, skipping `exclude`d ids.
    pub fn query_vector(
        &self,
        query: &EmbeddingVector,
        k: usize,
        measure: Measure,
        exclude: &[&str],
    ) -> Result<QueryOutcome, RetrievalError> {
        if k == 0 {
            return Err(RetrievalError::ZeroK);
        }
        if query.dim() != self.dim {
            return Err(RetrievalError::DimMismatch { expected: self.dim, got: query.dim() });
        }
        let mut scored = Vec::with_capacity(self.entries.len());
        for (pos, entry) in self.entries.iter().enumerate() {
            if exclude.contains(&entry.id.as_str()) {
                continue;
            }
            scored.push((pos, measure.score(query, &entry.values)?));
        }
        // Stable sort keeps index order among equal scores.
        if measure.is_similarity() {
            scored.sort_by(|a, b| b.1.total_cmp(&a.1));
        } else {
            scored.sort_by(|a, b| a.1.total_cmp(&b.1));
        }
        let truncated = k > scored.len();
        let results = scored
            .into_iter()
            .take(k)
            .enumerate()
            .map(|(i, (pos, score))| RetrievalResult { pair_id: self.entries[pos].id.clone(), score, rank: i + 1 })
            .collect();
        Ok(QueryOutcome { results, truncated })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub pair_id: String,
    pub score: f64,
    /// 1-based.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryOutcome {
    pub results: Vec<RetrievalResult>,
    /// Fewer than `k` candidates were available.
    pub truncated: bool,
}

/// Embeds each pair's description, in input order.
pub async fn build_index(pairs: &[EquationPair], provider: &dyn EmbeddingProvider) -> Result<Index, RetrievalError> {
    if pairs.is_empty() {
        return Err(RetrievalError::EmptyIndex);
    }
    let mut seen = HashSet::with_capacity(pairs.len());
    if let Some(dup) = pairs.iter().find(|p| !seen.insert(p.id.as_str())) {
        return Err(RetrievalError::DuplicateId(dup.id.clone()));
    }
    let mut entries = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let values = provider
            .embed(&pair.nl_text)
            .await
            .map_err(|e| RetrievalError::EmbedFailed { pair_id: pair.id.clone(), source: Box::new(e) })?;
        entries.push(IndexEntry { id: pair.id.clone(), values });
    }
    Index::new(provider.provider_id(), provider.dim(), entries)
}

/// Embeds `text` with `provider` and queries `index`.
pub async fn query(
    index: &Index,
    provider: &dyn EmbeddingProvider,
    text: &str,
    k: usize,
    measure: Measure,
    exclude: &[&str],
) -> Result<QueryOutcome, RetrievalError> {
    if provider.provider_id() != index.provider_id() {
        return Err(RetrievalError::ProviderMismatch {
            index: index.provider_id().to_owned(),
            provider: provider.provider_id().to_owned(),
        });
    }
    if k == 0 {
        return Err(RetrievalError::ZeroK);
    }
    let q = provider.embed(text).await?;
    index.query_vector(&q, k, measure, exclude)
}
