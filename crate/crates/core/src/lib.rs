//! Spoken-equation to LaTeX pipeline: corpus handling, canonical LaTeX
//! normalization, scoring, k-NN example retrieval, few-shot prompt assembly,
//! model clients and the experiment grid.

pub mod clients;
pub mod dataset;
pub mod harness;
pub mod metrics;
pub mod normalizer;
pub mod prompting;
pub mod retrieval;
mod rng;

pub use clients::{ChatModel, ClientError, GenerationConfig, Transcriber, TranscriptionResult};
pub use dataset::{load_dataset, split_dataset, Dataset, DatasetError, EquationPair, Split, SplitRatios};
pub use harness::{ExperimentConfig, Harness, HarnessOptions, ItemRecord, ResultRow};
pub use metrics::{el_distance, levenshtein, ElScore, HumanLabel, Thresholds};
pub use normalizer::{normalize, tokenize_latex, NormalizationConfig, Normalizer};
pub use prompting::{assemble, get_prompt, AssembledPrompt, PromptId};
pub use retrieval::{EmbeddingProvider, EmbeddingVector, Index, Measure, RetrievalResult};
pub use rng::SplitMix64;

/// Crate version, reported by the service health endpoint.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
