//! Experiment grid: every `(k, measure, prompt)` row generates LaTeX for the
//! whole test split and reports %EL under / over the thresholds, BLEU and chrF.

mod grid_file;
mod table;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{info, warn};

use crate::clients::{extract_latex, ChatModel, ClientError, GenerationConfig};
use crate::dataset::{Dataset, EquationPair, Split};
use crate::metrics::{
    annotation_agreement, corpus_bleu_chrf, el_bucket, el_distance, threshold_rates, AgreementReport, ElScore,
    HumanLabel, MetricsError, Surface, Thresholds,
};
use crate::normalizer::Normalizer;
use crate::prompting::{assemble_for_pair, AssemblyOptions, Demonstration, PromptError, PromptId};
use crate::retrieval::{self, EmbeddingProvider, Index, Measure, RetrievalError};

pub use grid_file::{default_grid, GridFile, GridFileError};
pub use table::{results_csv, results_table, sort_by_el, BASELINE_MARKER, COLUMNS};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("experiment grid is empty")]
    EmptyGrid,
    #[error("dataset has no test pairs")]
    NoTestItems,
    #[error("k = {0} needs a similarity or distance measure")]
    MissingMeasure(usize),
    #[error("index entry `{0}` is not a pair of the configured index split")]
    IndexSplitMismatch(String),
    #[error("item `{pair_id}`: retrieval failed: {source}")]
    Retrieval {
        pair_id: String,
        #[source]
        source: RetrievalError,
    },
    #[error("item `{pair_id}`: generation failed: {source}")]
    Generation {
        pair_id: String,
        #[source]
        source: ClientError,
    },
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("records file {path}: {message}")]
    Records { path: String, message: String },
}

/// Which dataset splits the retrieval index covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum IndexSplit {
    #[default]
    #[serde(rename = "train")]
    Train,
    #[serde(rename = "train+validation")]
    TrainValidation,
}

impl IndexSplit {
    pub fn splits(self) -> &'static [Split] {
        match self {
            IndexSplit::Train => &[Split::Train],
            IndexSplit::TrainValidation => &[Split::Train, Split::Validation],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            IndexSplit::Train => "train",
            IndexSplit::TrainValidation => "train+validation",
        }
    }
}

impl std::str::FromStr for IndexSplit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(IndexSplit::Train),
            "train+validation" | "train+val" => Ok(IndexSplit::TrainValidation),
            other => Err(format!("unknown index split `{other}` (expected train or train+validation)")),
        }
    }
}

/// One grid row. `k = 0` is the no-example baseline and carries no measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub k: usize,
    pub measure: Option<Measure>,
    pub prompt_id: PromptId,
    pub generation: GenerationConfig,
    pub index_split: IndexSplit,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn baseline(prompt_id: PromptId) -> Self {
        Self {
            k: 0,
            measure: None,
            prompt_id,
            generation: GenerationConfig::default(),
            index_split: IndexSplit::default(),
            seed: 0,
        }
    }

    pub fn with_examples(k: usize, measure: Measure, prompt_id: PromptId) -> Self {
        Self { k, measure: Some(measure), ..Self::baseline(prompt_id) }
    }

    pub fn is_baseline(&self) -> bool {
        self.k == 0
    }

    fn checked_measure(&self) -> Result<Option<Measure>, HarnessError> {
        match (self.k, self.measure) {
            (0, _) => Ok(None),
            (k, None) => Err(HarnessError::MissingMeasure(k)),
            (_, Some(m)) => Ok(Some(m)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub k: usize,
    pub measure: Option<Measure>,
    pub prompt_id: PromptId,
    pub el_lt_low: f64,
    pub el_gt_high: f64,
    /// On the surface chosen in [`HarnessOptions::surface`].
    pub bleu: f64,
    pub chrf: f64,
    pub n_items: usize,
    /// BLEU and chrF on the other surface.
    pub alternate: SurfaceScores,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceScores {
    pub surface: Surface,
    pub bleu: f64,
    pub chrf: f64,
}

/// What happened to one test pair, persisted for audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemRecord {
    pub pair_id: String,
    pub query: String,
    pub retrieved_ids: Vec<String>,
    pub raw_completion: String,
    pub latex: String,
    pub el: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub config: ExperimentConfig,
    pub row: ResultRow,
    /// Sorted by pair id.
    pub records: Vec<ItemRecord>,
}

/// A row that stopped early. `partial` holds the items finished before the
/// failure, sorted by pair id.
#[derive(Debug)]
pub struct RowFailure {
    pub config: ExperimentConfig,
    pub error: HarnessError,
    pub partial: Vec<ItemRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarnessOptions {
    /// Maximum in-flight items within a row.
    pub concurrency: usize,
    pub thresholds: Thresholds,
    pub surface: Surface,
    pub assembly: AssemblyOptions,
}

impl Default for HarnessOptions {
    fn default() -> Self {
        Self {
            concurrency: 4,
            thresholds: Thresholds::default(),
            surface: Surface::Normalized,
            assembly: AssemblyOptions::default(),
        }
    }
}

/// Everything a grid run reads. All of it is shared immutably across rows.
pub struct Harness<'a> {
    pub dataset: &'a Dataset,
    pub index: &'a Index,
    pub provider: &'a dyn EmbeddingProvider,
    pub llm: &'a dyn ChatModel,
    pub normalizer: &'a Normalizer,
    pub options: HarnessOptions,
}

impl Harness<'_> {
    /// Runs one row over the test split.
    pub async fn run_experiment(&self, config: &ExperimentConfig) -> Result<ExperimentOutcome, RowFailure> {
        let fail = |error: HarnessError, partial: Vec<ItemRecord>| RowFailure { config: config.clone(), error, partial };
        let measure = config.checked_measure().map_err(|e| fail(e, vec![]))?;

        let by_id = self.dataset.by_id();
        if measure.is_some() {
            let allowed = config.index_split.splits();
            if let Some(bad) = self.index.ids().find(|id| by_id.get(id).is_none_or(|p| !allowed.contains(&p.split))) {
                return Err(fail(HarnessError::IndexSplitMismatch(bad.to_owned()), vec![]));
            }
        }

        let tests: Vec<&EquationPair> = self.dataset.in_splits(&[Split::Test]).collect();
        if tests.is_empty() {
            return Err(fail(HarnessError::NoTestItems, vec![]));
        }
        info!(k = config.k, measure = ?measure, prompt = %config.prompt_id, items = tests.len(), "running row");

        let mut generation = config.generation.clone();
        generation.seed = Some(config.seed);
        let generation = &generation;
        let by_id = &by_id;
        let mut items = stream::iter(tests.iter().copied())
            .map(|pair| self.run_item(config, measure, generation, by_id, pair))
            .buffer_unordered(self.options.concurrency.max(1));

        let mut records = Vec::with_capacity(tests.len());
        while let Some(item) = items.next().await {
            match item {
                Ok(rec) => records.push(rec),
                Err(error) => {
                    drop(items);
                    records.sort_by(|a, b| a.pair_id.cmp(&b.pair_id));
                    warn!(%error, done = records.len(), "row aborted");
                    return Err(fail(error, records));
                }
            }
        }
        records.sort_by(|a, b| a.pair_id.cmp(&b.pair_id));

        let row = self.aggregate(config, measure, &records, by_id).map_err(|e| fail(e, vec![]))?;
        Ok(ExperimentOutcome { config: config.clone(), row, records })
    }

    async fn run_item(
        &self,
        config: &ExperimentConfig,
        measure: Option<Measure>,
        generation: &GenerationConfig,
        by_id: &BTreeMap<&str, &EquationPair>,
        pair: &EquationPair,
    ) -> Result<ItemRecord, HarnessError> {
        let mut demos = Vec::new();
        if let Some(measure) = measure {
            let found = retrieval::query(self.index, self.provider, &pair.nl_text, config.k, measure, &[&pair.id])
                .await
                .map_err(|source| HarnessError::Retrieval { pair_id: pair.id.clone(), source })?;
            for r in found.results {
                // Index ids were checked against the dataset before the row started.
                let ex = by_id[r.pair_id.as_str()];
                demos.push(Demonstration {
                    pair_id: r.pair_id,
                    nl_text: ex.nl_text.clone(),
                    latex: ex.latex.clone(),
                    rank: r.rank,
                    score: r.score,
                });
            }
        }
        let prompt = assemble_for_pair(&config.prompt_id.prompt(), &demos, &pair.nl_text, &pair.id, self.options.assembly)?;
        let raw = self
            .llm
            .generate(&prompt, generation)
            .await
            .map_err(|source| HarnessError::Generation { pair_id: pair.id.clone(), source })?;
        let latex = extract_latex(&raw).unwrap_or_default();
        let el = el_distance(&latex, &pair.latex, self.normalizer).value;
        Ok(ItemRecord {
            pair_id: pair.id.clone(),
            query: pair.nl_text.clone(),
            retrieved_ids: demos.into_iter().map(|d| d.pair_id).collect(),
            raw_completion: raw,
            latex,
            el,
        })
    }

    fn aggregate(
        &self,
        config: &ExperimentConfig,
        measure: Option<Measure>,
        records: &[ItemRecord],
        by_id: &BTreeMap<&str, &EquationPair>,
    ) -> Result<ResultRow, HarnessError> {
        let scores: Vec<ElScore> = records.iter().map(|r| ElScore::from_value(r.el)).collect();
        let (el_lt_low, el_gt_high) = threshold_rates(&scores, self.options.thresholds)?;
        let hyps: Vec<&str> = records.iter().map(|r| r.latex.as_str()).collect();
        let refs: Vec<&str> = records.iter().map(|r| by_id[r.pair_id.as_str()].latex.as_str()).collect();
        let (bleu, chrf) = corpus_bleu_chrf(&hyps, &refs, self.options.surface, self.normalizer)?;
        let other = match self.options.surface {
            Surface::Normalized => Surface::Raw,
            Surface::Raw => Surface::Normalized,
        };
        let (alt_bleu, alt_chrf) = corpus_bleu_chrf(&hyps, &refs, other, self.normalizer)?;
        Ok(ResultRow {
            k: config.k,
            measure,
            prompt_id: config.prompt_id,
            el_lt_low,
            el_gt_high,
            bleu,
            chrf,
            n_items: records.len(),
            alternate: SurfaceScores { surface: other, bleu: alt_bleu, chrf: alt_chrf },
        })
    }

    /// Runs rows one after another. A failed row is reported in place and
    /// the remaining rows still run.
    pub async fn run_grid(
        &self,
        configs: &[ExperimentConfig],
    ) -> Result<Vec<Result<ExperimentOutcome, RowFailure>>, HarnessError> {
        if configs.is_empty() {
            return Err(HarnessError::EmptyGrid);
        }
        let mut out = Vec::with_capacity(configs.len());
        for config in configs {
            out.push(self.run_experiment(config).await);
        }
        Ok(out)
    }
}

/// Buckets each record's EL and compares against human labels.
pub fn score_annotations(
    records: &[ItemRecord],
    annotations: &[HumanLabel],
    thresholds: Thresholds,
) -> Result<AgreementReport, MetricsError> {
    let predicted: Vec<_> = records
        .iter()
        .map(|r| (r.pair_id.clone(), el_bucket(&ElScore::from_value(r.el), thresholds)))
        .collect();
    annotation_agreement(&predicted, annotations)
}

pub fn write_records(path: impl AsRef<Path>, records: &[ItemRecord]) -> Result<(), HarnessError> {
    let path = path.as_ref();
    let fail = |e: std::io::Error| HarnessError::Records { path: path.display().to_string(), message: e.to_string() };
    let mut out = BufWriter::new(File::create(path).map_err(fail)?);
    for r in records {
        writeln!(out, "{}", serde_json::to_string(r).expect("record serializes")).map_err(fail)?;
    }
    out.flush().map_err(fail)
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<ItemRecord>, HarnessError> {
    read_jsonl(path)
}

/// Human labels, one `{"pair_id": ..., "label": -1|0|1}` per line.
pub fn read_annotations(path: impl AsRef<Path>) -> Result<Vec<HumanLabel>, HarnessError> {
    read_jsonl(path)
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>, HarnessError> {
    let path = path.as_ref();
    let fail = |message: String| HarnessError::Records { path: path.display().to_string(), message };
    let file = File::open(path).map_err(|e| fail(e.to_string()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| fail(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| fail(format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}
