//! Service configuration file and model backend selection.
//!
//! ```toml
//! listen = "127.0.0.1:8000"
//! dataset = "data/pairs.jsonl"
//! index = "data/index.json"
//!
//! [defaults]
//! k = 5
//! measure = "cosine"
//! prompt_id = "p2"
//!
//! [llm]
//! kind = "remote"
//! base_url = "https://api.openai.com/v1"
//! ```
//!
//! Credentials can stay out of the file: `TEXVOX_ASR_API_KEY`,
//! `TEXVOX_EMBEDDING_API_KEY` and `TEXVOX_LLM_API_KEY` override the `api_key`
//! of the matching remote backend.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use texvox_core::clients::{
    EchoLastExample, FailingChatModel, FailingTranscriber, FixedResponse, FixtureTranscriber, NearestNeighborLatex,
    OpenAiCompatible, RemoteEndpoint, RemoteTranscriber, RetryPolicy, Secret,
};
use texvox_core::dataset::Dataset;
use texvox_core::harness::IndexSplit;
use texvox_core::retrieval::{HashedTrigramEmbedder, RemoteEmbedder};
use texvox_core::{ChatModel, EmbeddingProvider, GenerationConfig, Measure, PromptId, Transcriber};

use crate::ServiceError;

/// Largest k a request may ask for.
pub const MAX_K: usize = 20;

pub const ASR_KEY_VAR: &str = "TEXVOX_ASR_API_KEY";
pub const EMBEDDING_KEY_VAR: &str = "TEXVOX_EMBEDDING_API_KEY";
pub const LLM_KEY_VAR: &str = "TEXVOX_LLM_API_KEY";

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_listen")]
    pub listen: String,
    pub dataset: PathBuf,
    pub index: PathBuf,
    /// Splits the index was built from; the nearest-neighbor stub draws on the same pairs.
    #[serde(default)]
    pub index_split: IndexSplit,
    #[serde(default)]
    pub defaults: RequestDefaults,
    #[serde(default)]
    pub generation: GenerationConfig,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default)]
    pub asr: AsrConfig,
    #[serde(default)]
    pub embedding: EmbeddingConfig,
    #[serde(default)]
    pub llm: LlmConfig,
    #[serde(default = "default_origins")]
    pub cors_origins: Vec<String>,
}

fn default_listen() -> String {
    "127.0.0.1:8000".into()
}

fn default_origins() -> Vec<String> {
    ["http://localhost:5173", "http://127.0.0.1:5173", "http://localhost:3000", "http://127.0.0.1:3000"]
        .map(String::from)
        .to_vec()
}

/// Used when a request leaves k, measure or prompt_id out.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequestDefaults {
    pub k: usize,
    pub measure: Measure,
    pub prompt_id: PromptId,
}

impl Default for RequestDefaults {
    fn default() -> Self {
        Self { k: 5, measure: Measure::Cosine, prompt_id: PromptId::P2 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AudioFixture {
    pub audio: PathBuf,
    pub text: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AsrConfig {
    /// Known recordings mapped to fixed transcriptions.
    Fixture {
        #[serde(default)]
        fixtures: Vec<AudioFixture>,
    },
    Remote(RemoteEndpoint),
    Failing,
}

impl Default for AsrConfig {
    fn default() -> Self {
        AsrConfig::Fixture { fixtures: Vec::new() }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EmbeddingConfig {
    #[default]
    Offline,
    Remote {
        #[serde(flatten)]
        endpoint: RemoteEndpoint,
        model: String,
        dim: usize,
    },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LlmConfig {
    /// Answers with the LaTeX of the closest indexed description.
    #[default]
    NearestNeighbor,
    Echo,
    Fixed {
        text: String,
    },
    Failing {
        #[serde(default)]
        status: Option<u16>,
    },
    Remote(RemoteEndpoint),
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, ServiceError> {
        toml::from_str(text).map_err(|e| ServiceError::Config(e.to_string()))
    }

    /// Reads the file, resolves relative paths against its directory and
    /// applies credential overrides from the environment.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ServiceError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServiceError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config = Self::from_toml(&text)?;
        if let Some(dir) = path.parent() {
            config.resolve_paths(dir);
        }
        config.apply_env(|name| std::env::var(name).ok());
        config.validate()?;
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.dataset);
        fix(&mut self.index);
        if let AsrConfig::Fixture { fixtures } = &mut self.asr {
            fixtures.iter_mut().for_each(|f| fix(&mut f.audio));
        }
    }

    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) {
        let key = |name| lookup(name).filter(|v| !v.is_empty()).map(Secret::new);
        if let (AsrConfig::Remote(ep), Some(k)) = (&mut self.asr, key(ASR_KEY_VAR)) {
            ep.api_key = k;
        }
        if let (EmbeddingConfig::Remote { endpoint, .. }, Some(k)) = (&mut self.embedding, key(EMBEDDING_KEY_VAR)) {
            endpoint.api_key = k;
        }
        if let (LlmConfig::Remote(ep), Some(k)) = (&mut self.llm, key(LLM_KEY_VAR)) {
            ep.api_key = k;
        }
    }

    pub fn validate(&self) -> Result<(), ServiceError> {
        for (what, p) in [("dataset", &self.dataset), ("index", &self.index)] {
            if !p.is_file() {
                return Err(ServiceError::Config(format!("{what} file {} does not exist", p.display())));
            }
        }
        if self.defaults.k > MAX_K {
            return Err(ServiceError::Config(format!("default k = {} exceeds {MAX_K}", self.defaults.k)));
        }
        Ok(())
    }
}

impl AsrConfig {
    pub fn build(&self, retry: RetryPolicy) -> Result<Arc<dyn Transcriber>, ServiceError> {
        Ok(match self {
            AsrConfig::Fixture { fixtures } => {
                let mut asr = FixtureTranscriber::new();
                for f in fixtures {
                    let bytes = std::fs::read(&f.audio)
                        .map_err(|e| ServiceError::Config(format!("audio fixture {}: {e}", f.audio.display())))?;
                    asr.register(&bytes, f.text.clone());
                }
                Arc::new(asr)
            }
            AsrConfig::Remote(ep) => Arc::new(RemoteTranscriber::new(ep.clone(), retry)),
            AsrConfig::Failing => Arc::new(FailingTranscriber),
        })
    }
}

impl EmbeddingConfig {
    pub fn build(&self, retry: RetryPolicy) -> Arc<dyn EmbeddingProvider> {
        match self {
            EmbeddingConfig::Offline => Arc::new(HashedTrigramEmbedder),
            EmbeddingConfig::Remote { endpoint, model, dim } => {
                Arc::new(RemoteEmbedder::new(endpoint.clone(), model.clone(), *dim, retry))
            }
        }
    }
}

impl LlmConfig {
    /// `dataset` and `splits` feed the nearest-neighbor stub.
    pub fn build(&self, dataset: &Dataset, splits: IndexSplit, retry: RetryPolicy) -> Arc<dyn ChatModel> {
        match self {
            LlmConfig::NearestNeighbor => Arc::new(NearestNeighborLatex::new(
                dataset.in_splits(splits.splits()).map(|p| (p.nl_text.clone(), p.latex.clone())),
            )),
            LlmConfig::Echo => Arc::new(EchoLastExample),
            LlmConfig::Fixed { text } => Arc::new(FixedResponse(text.clone())),
            LlmConfig::Failing { status } => Arc::new(FailingChatModel { status: *status }),
            LlmConfig::Remote(ep) => Arc::new(OpenAiCompatible::new(ep.clone(), retry)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
dataset = "pairs.jsonl"
index = "index.json"
"#;

    #[test]
    fn defaults() {
        let c = ServiceConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.listen, "127.0.0.1:8000");
        assert_eq!(c.defaults, RequestDefaults::default());
        assert!(matches!(c.llm, LlmConfig::NearestNeighbor));
        assert!(matches!(c.embedding, EmbeddingConfig::Offline));
        assert!(c.cors_origins.iter().all(|o| o.contains("localhost") || o.contains("127.0.0.1")));
    }

    #[test]
    fn remote_backends_and_env_keys() {
        let text = format!(
            r#"{MINIMAL}
[llm]
kind = "remote"
base_url = "http://llm.local/v1"
api_key = "from-file"
timeout = 1500

[embedding]
kind = "remote"
base_url = "http://emb.local/v1"
model = "text-embedding-3-small"
dim = 1536
"#
        );
        let mut c = ServiceConfig::from_toml(&text).unwrap();
        c.apply_env(|name| (name == LLM_KEY_VAR || name == EMBEDDING_KEY_VAR).then(|| format!("env-{name}")));
        let LlmConfig::Remote(ep) = &c.llm else { panic!() };
        assert_eq!(ep.api_key.expose(), "env-TEXVOX_LLM_API_KEY");
        assert_eq!(ep.timeout.as_millis(), 1500);
        let EmbeddingConfig::Remote { endpoint, dim, .. } = &c.embedding else { panic!() };
        assert_eq!(endpoint.api_key.expose(), "env-TEXVOX_EMBEDDING_API_KEY");
        assert_eq!(*dim, 1536);
        assert!(!format!("{c:?}").contains("from-file"));
    }

    #[test]
    fn rejects_unknown_backend_and_missing_files() {
        assert!(ServiceConfig::from_toml(&format!("{MINIMAL}\n[llm]\nkind = \"oracle\"\n")).is_err());
        let mut c = ServiceConfig::from_toml(MINIMAL).unwrap();
        c.resolve_paths(Path::new("/nonexistent"));
        assert!(c.validate().is_err());
    }
}
