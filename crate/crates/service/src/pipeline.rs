use std::sync::Arc;

use serde::Deserialize;
use texvox_core::clients::{extract_latex, AudioInput, ClientError};
use texvox_core::dataset::{load_dataset, Dataset};
use texvox_core::prompting::{assemble, AssemblyOptions, Demonstration};
use texvox_core::retrieval::{self, Index};
use texvox_core::{ChatModel, EmbeddingProvider, GenerationConfig, Measure, PromptId, Transcriber, TranscriptionResult};
use tracing::{debug, info};

use crate::config::{RequestDefaults, ServiceConfig, MAX_K};
use crate::ServiceError;

/// Per-request settings; anything left out falls back to the server defaults.
#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
pub struct Overrides {
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub measure: Option<String>,
    #[serde(default)]
    pub prompt_id: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Resolved {
    pub k: usize,
    pub measure: Option<Measure>,
    pub prompt_id: PromptId,
}

#[derive(Debug)]
pub(crate) enum Failure {
    BadRequest(String),
    UnsupportedAudio(String),
    Transcription(String),
    Generation(String),
}

pub(crate) struct Generated {
    pub latex: String,
    pub examples: Vec<(String, f64)>,
    pub resolved: Resolved,
}

/// Everything a request reads. Immutable once built.
pub struct Pipeline {
    dataset: Dataset,
    index: Index,
    provider: Arc<dyn EmbeddingProvider>,
    asr: Arc<dyn Transcriber>,
    llm: Arc<dyn ChatModel>,
    defaults: RequestDefaults,
    generation: GenerationConfig,
    assembly: AssemblyOptions,
}

impl Pipeline {
    pub fn new(
        dataset: Dataset,
        index: Index,
        provider: Arc<dyn EmbeddingProvider>,
        asr: Arc<dyn Transcriber>,
        llm: Arc<dyn ChatModel>,
        defaults: RequestDefaults,
        generation: GenerationConfig,
    ) -> Result<Self, ServiceError> {
        if index.provider_id() != provider.provider_id() {
            return Err(ServiceError::Startup(format!(
                "index was built with `{}` but the configured embedding provider is `{}`",
                index.provider_id(),
                provider.provider_id()
            )));
        }
        if let Some(missing) = index.ids().find(|id| dataset.get(id).is_none()) {
            return Err(ServiceError::Startup(format!("index entry `{missing}` is not in the dataset")));
        }
        Ok(Self { dataset, index, provider, asr, llm, defaults, generation, assembly: AssemblyOptions::default() })
    }

    pub fn load(config: &ServiceConfig) -> Result<Self, ServiceError> {
        let dataset = load_dataset(&config.dataset).map_err(|e| ServiceError::Startup(e.to_string()))?;
        let index = Index::load(&config.index).map_err(|e| ServiceError::Startup(e.to_string()))?;
        let provider = config.embedding.build(config.retry);
        let asr = config.asr.build(config.retry)?;
        let llm = config.llm.build(&dataset, config.index_split, config.retry);
        info!(pairs = dataset.len(), index = index.len(), asr = asr.id(), llm = llm.id(), "pipeline loaded");
        Self::new(dataset, index, provider, asr, llm, config.defaults, config.generation.clone())
    }

    pub fn index(&self) -> &Index {
        &self.index
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub(crate) fn resolve(&self, o: &Overrides) -> Result<Resolved, Failure> {
        let k = o.k.unwrap_or(self.defaults.k);
        if k > MAX_K {
            return Err(Failure::BadRequest(format!("k must be between 0 and {MAX_K}, got {k}")));
        }
        let measure = match &o.measure {
            Some(m) => m.parse::<Measure>().map_err(|e| Failure::BadRequest(e.to_string()))?,
            None => self.defaults.measure,
        };
        let prompt_id = match &o.prompt_id {
            Some(p) => p.parse::<PromptId>().map_err(|e| Failure::BadRequest(e.to_string()))?,
            None => self.defaults.prompt_id,
        };
        Ok(Resolved { k, measure: (k > 0).then_some(measure), prompt_id })
    }

    pub(crate) async fn transcribe(&self, bytes: Vec<u8>) -> Result<TranscriptionResult, Failure> {
        self.asr.transcribe(&AudioInput::wav(bytes)).await.map_err(|e| match e {
            ClientError::Format(m) => Failure::UnsupportedAudio(m),
            other => Failure::Transcription(other.to_string()),
        })
    }

    /// retrieve → assemble → generate → extract.
    pub(crate) async fn generate(&self, text: &str, overrides: &Overrides) -> Result<Generated, Failure> {
        let resolved = self.resolve(overrides)?;
        if text.trim().is_empty() {
            return Err(Failure::BadRequest("text must not be empty".into()));
        }
        let mut demos = Vec::new();
        if let Some(measure) = resolved.measure {
            let found = retrieval::query(&self.index, self.provider.as_ref(), text, resolved.k, measure, &[])
                .await
                .map_err(|e| Failure::Generation(format!("retrieval failed: {e}")))?;
            for r in found.results {
                let pair = self.dataset.get(&r.pair_id).expect("index ids checked at startup");
                demos.push(Demonstration {
                    pair_id: r.pair_id,
                    nl_text: pair.nl_text.clone(),
                    latex: pair.latex.clone(),
                    rank: r.rank,
                    score: r.score,
                });
            }
        }
        let prompt = assemble(&resolved.prompt_id.prompt(), &demos, text, self.assembly);
        debug!(k = resolved.k, prompt = %resolved.prompt_id, "generating");
        let raw = self
            .llm
            .generate(&prompt, &self.generation)
            .await
            .map_err(|e| Failure::Generation(e.to_string()))?;
        let latex = extract_latex(&raw).map_err(|e| Failure::Generation(e.to_string()))?;
        Ok(Generated { latex, examples: demos.into_iter().map(|d| (d.pair_id, d.score)).collect(), resolved })
    }
}
