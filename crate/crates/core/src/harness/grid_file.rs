use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use super::{ExperimentConfig, IndexSplit};
use crate::clients::GenerationConfig;
use crate::prompting::PromptId;
use crate::retrieval::Measure;

#[derive(Debug, Error)]
pub enum GridFileError {
    #[error("cannot read grid file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid grid file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
}

/// Grid configuration, TOML:
///
/// ```toml
/// seed = 0
/// index_split = "train"
///
/// [generation]
/// model_name = "gpt-3.5-turbo"
///
/// [[experiment]]
/// k = 0
/// prompt = "p1"
///
/// [[experiment]]
/// k = 5
/// measure = "cosine"
/// prompt = "p2"
/// ```
///
/// Unless `allow_any_k` is set, k must be 0 or lie in 2..=6.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub index_split: IndexSplit,
    #[serde(default)]
    pub allow_any_k: bool,
    #[serde(default)]
    pub generation: GenerationConfig,
    pub experiment: Vec<GridRow>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRow {
    pub k: usize,
    #[serde(default)]
    pub measure: Option<Measure>,
    pub prompt: PromptId,
}

impl GridFile {
    pub fn from_toml(text: &str) -> Result<Self, GridFileError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GridFileError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| GridFileError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn configs(&self) -> Result<Vec<ExperimentConfig>, GridFileError> {
        self.experiment
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let err = |message: String| GridFileError::Row { row: i + 1, message };
                if !self.allow_any_k && row.k != 0 && !(2..=6).contains(&row.k) {
                    return Err(err(format!("k = {} outside the default bounds {{0}} ∪ 2..=6", row.k)));
                }
                match (row.k, row.measure) {
                    (0, Some(_)) => return Err(err("the k = 0 baseline takes no measure".into())),
                    (k, None) if k > 0 => return Err(err(format!("k = {k} needs a measure"))),
                    _ => {}
                }
                Ok(ExperimentConfig {
                    k: row.k,
                    measure: row.measure,
                    prompt_id: row.prompt,
                    generation: self.generation.clone(),
                    index_split: self.index_split,
                    seed: self.seed,
                })
            })
            .collect()
    }
}

/// A p1 baseline followed by every k in 2..=6 for each measure and prompt.
pub fn default_grid() -> Vec<ExperimentConfig> {
    let mut out = vec![ExperimentConfig::baseline(PromptId::P1)];
    for k in 2..=6 {
        for measure in Measure::ALL {
            for prompt in PromptId::ALL {
                out.push(ExperimentConfig::with_examples(k, measure, prompt));
            }
        }
    }
    out
}
