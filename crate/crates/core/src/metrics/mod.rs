//! Scoring generated equations against references.
//!
//! * [`el_distance`]: normalized Levenshtein distance after canonicalization.
//! * [`bleu`]: corpus BLEU-4 over LaTeX tokens.
//! * [`chrf`]: character n-gram F-score, β = 2.
//! * [`threshold_rates`] / [`el_bucket`]: how many scores fall under or over the
//!   match thresholds, and the three-way Match / Almost / Not-Match label.
//! * [`annotation_agreement`]: agreement between machine buckets and human labels.

mod bleu;
mod chrf;
mod edit;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::normalizer::{tokenize_latex, Normalizer};

pub use bleu::{bleu, MAX_ORDER};
pub use chrf::{chrf, sentence_chrf, BETA, CHAR_ORDER};
pub use edit::{el_distance, levenshtein, ElScore};

pub const DEFAULT_LOW: f64 = 0.1;
pub const DEFAULT_HIGH: f64 = 0.4;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("hypothesis count {hyp} differs from reference count {reference}")]
    LengthMismatch { hyp: usize, reference: usize },
    #[error("human label references unknown pair id `{0}`")]
    UnknownPair(String),
    #[error("label {0} is not one of -1, 0, 1")]
    BadLabel(i8),
}

/// Lower and upper EL cut points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub low: f64,
    pub high: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { low: DEFAULT_LOW, high: DEFAULT_HIGH }
    }
}

/// Percentages (0 to 100) of scores strictly below `low` and strictly above `high`.
pub fn threshold_rates(scores: &[ElScore], thresholds: Thresholds) -> Result<(f64, f64), MetricsError> {
    if scores.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let n = scores.len() as f64;
    let below = scores.iter().filter(|s| s.value < thresholds.low).count() as f64;
    let above = scores.iter().filter(|s| s.value > thresholds.high).count() as f64;
    Ok((100.0 * below / n, 100.0 * above / n))
}

/// Match / Almost Match / Not Match, encoded as 1 / 0 / -1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Bucket {
    NotMatch,
    AlmostMatch,
    Match,
}

impl Bucket {
    pub const ALL: [Bucket; 3] = [Bucket::NotMatch, Bucket::AlmostMatch, Bucket::Match];

    pub fn code(self) -> i8 {
        match self {
            Bucket::NotMatch => -1,
            Bucket::AlmostMatch => 0,
            Bucket::Match => 1,
        }
    }

    fn slot(self) -> usize {
        (self.code() + 1) as usize
    }
}

impl From<Bucket> for i8 {
    fn from(b: Bucket) -> i8 {
        b.code()
    }
}

impl TryFrom<i8> for Bucket {
    type Error = MetricsError;

    fn try_from(v: i8) -> Result<Self, Self::Error> {
        match v {
            -1 => Ok(Bucket::NotMatch),
            0 => Ok(Bucket::AlmostMatch),
            1 => Ok(Bucket::Match),
            other => Err(MetricsError::BadLabel(other)),
        }
    }
}

pub fn el_bucket(score: &ElScore, thresholds: Thresholds) -> Bucket {
    if score.value < thresholds.low {
        Bucket::Match
    } else if score.value <= thresholds.high {
        Bucket::AlmostMatch
    } else {
        Bucket::NotMatch
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HumanLabel {
    pub pair_id: String,
    pub label: Bucket,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementReport {
    pub n_items: usize,
    pub agreement: f64,
    /// `confusion[human][predicted]`, rows and columns ordered -1, 0, 1.
    pub confusion: [[usize; 3]; 3],
}

impl AgreementReport {
    pub fn cell(&self, human: Bucket, predicted: Bucket) -> usize {
        self.confusion[human.slot()][predicted.slot()]
    }
}

/// Exact-agreement fraction and confusion matrix over the human-labelled ids.
/// An empty `human` list yields agreement 0 over 0 items.
pub fn annotation_agreement(
    predicted: &[(String, Bucket)],
    human: &[HumanLabel],
) -> Result<AgreementReport, MetricsError> {
    let lookup: HashMap<&str, Bucket> = predicted.iter().map(|(id, b)| (id.as_str(), *b)).collect();
    let mut confusion = [[0usize; 3]; 3];
    let mut agree = 0usize;
    for label in human {
        let p = *lookup
            .get(label.pair_id.as_str())
            .ok_or_else(|| MetricsError::UnknownPair(label.pair_id.clone()))?;
        confusion[label.label.slot()][p.slot()] += 1;
        agree += usize::from(p == label.label);
    }
    let n = human.len();
    Ok(AgreementReport {
        n_items: n,
        agreement: if n == 0 { 0.0 } else { agree as f64 / n as f64 },
        confusion,
    })
}

/// Which text BLEU and chrF see.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Surface {
    /// Canonical form produced by the normalizer.
    #[default]
    Normalized,
    /// The LaTeX exactly as generated / stored.
    Raw,
}

/// Corpus-level BLEU and chrF on the chosen surface.
pub fn corpus_bleu_chrf(
    hypotheses: &[&str],
    references: &[&str],
    surface: Surface,
    normalizer: &Normalizer,
) -> Result<(f64, f64), MetricsError> {
    let prepare = |s: &&str| match surface {
        Surface::Normalized => normalizer.normalize(s),
        Surface::Raw => s.to_string(),
    };
    let hyp: Vec<String> = hypotheses.iter().map(prepare).collect();
    let reference: Vec<String> = references.iter().map(prepare).collect();
    let hyp_tokens: Vec<Vec<&str>> = hyp.iter().map(|s| tokenize_latex(s)).collect();
    let ref_tokens: Vec<Vec<&str>> = reference.iter().map(|s| tokenize_latex(s)).collect();
    Ok((bleu(&hyp_tokens, &ref_tokens)?, chrf(&hyp, &reference)?))
}
