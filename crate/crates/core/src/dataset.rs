//! Equation corpus: natural-language descriptions paired with LaTeX sources.
//!
//! Corpora are stored as JSON Lines, one object per line with the keys
//! `id`, `nl_text`, `latex` and an optional `split`.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::SplitMix64;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("duplicate pair id `{0}`")]
    DuplicateId(String),
    #[error("pair `{id}` has an empty `{field}` field")]
    EmptyField { id: String, field: &'static str },
    #[error("split ratios must be positive and sum to 1 (got {0:?})")]
    BadRatios((f64, f64, f64)),
    #[error("cannot split an empty dataset")]
    Empty,
    #[error("unknown split `{0}` (expected train, validation, test or unassigned)")]
    UnknownSplit(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
    #[default]
    Unassigned,
}

impl Split {
    pub const ALL: [Split; 4] = [Split::Train, Split::Validation, Split::Test, Split::Unassigned];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
            Split::Unassigned => "unassigned",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "validation" | "val" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            "unassigned" => Ok(Split::Unassigned),
            other => Err(DatasetError::UnknownSplit(other.to_string())),
        }
    }
}

/// One natural-language equation description with its LaTeX source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquationPair {
    pub id: String,
    pub nl_text: String,
    pub latex: String,
    #[serde(default)]
    pub split: Split,
}

impl EquationPair {
    pub fn new(id: impl Into<String>, nl_text: impl Into<String>, latex: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            nl_text: nl_text.into(),
            latex: latex.into(),
            split: Split::Unassigned,
        }
    }

    fn validate(&self) -> Result<(), DatasetError> {
        if self.nl_text.trim().is_empty() {
            return Err(DatasetError::EmptyField { id: self.id.clone(), field: "nl_text" });
        }
        if self.latex.trim().is_empty() {
            return Err(DatasetError::EmptyField { id: self.id.clone(), field: "latex" });
        }
        Ok(())
    }
}

/// Per-split pair counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SplitCounts {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
    pub unassigned: usize,
}

impl SplitCounts {
    pub fn total(&self) -> usize {
        self.train + self.validation + self.test + self.unassigned
    }

    pub fn get(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train,
            Split::Validation => self.validation,
            Split::Test => self.test,
            Split::Unassigned => self.unassigned,
        }
    }

    fn bump(&mut self, split: Split) {
        match split {
            Split::Train => self.train += 1,
            Split::Validation => self.validation += 1,
            Split::Test => self.test += 1,
            Split::Unassigned => self.unassigned += 1,
        }
    }
}

/// An immutable, validated, ordered collection of [`EquationPair`]s.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pairs: Vec<EquationPair>,
    counts: SplitCounts,
}

impl Dataset {
    /// Validates ids and fields and computes split counts.
    pub fn from_pairs(pairs: Vec<EquationPair>) -> Result<Self, DatasetError> {
        let mut seen = HashSet::with_capacity(pairs.len());
        let mut counts = SplitCounts::default();
        for pair in &pairs {
            if !seen.insert(pair.id.as_str()) {
                return Err(DatasetError::DuplicateId(pair.id.clone()));
            }
            pair.validate()?;
            counts.bump(pair.split);
        }
        Ok(Self { pairs, counts })
    }

    pub fn pairs(&self) -> &[EquationPair] {
        &self.pairs
    }

    pub fn counts(&self) -> SplitCounts {
        self.counts
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&EquationPair> {
        self.pairs.iter().find(|p| p.id == id)
    }

    /// Pairs belonging to any of `splits`, in dataset order.
    pub fn in_splits<'a>(&'a self, splits: &'a [Split]) -> impl Iterator<Item = &'a EquationPair> + 'a {
        self.pairs.iter().filter(move |p| splits.contains(&p.split))
    }

    /// Lookup table from id to pair.
    pub fn by_id(&self) -> BTreeMap<&str, &EquationPair> {
        self.pairs.iter().map(|p| (p.id.as_str(), p)).collect()
    }

    pub fn into_pairs(self) -> Vec<EquationPair> {
        self.pairs
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPair {
    id: String,
    nl_text: String,
    latex: String,
    #[serde(default)]
    split: Option<Split>,
}

/// Loads a JSON Lines corpus. Blank lines are skipped; line numbers in
/// errors are 1-based.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_dataset(BufReader::new(file)).map_err(|e| match e {
        DatasetError::Io { source, .. } => DatasetError::Io {
            path: path.display().to_string(),
            source,
        },
        other => other,
    })
}

pub fn read_dataset(reader: impl BufRead) -> Result<Dataset, DatasetError> {
    let mut pairs = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| DatasetError::Io { path: "<reader>".into(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawPair = serde_json::from_str(&line).map_err(|e| DatasetError::Malformed {
            line: idx + 1,
            message: e.to_string(),
        })?;
        let pair = EquationPair {
            id: raw.id,
            nl_text: raw.nl_text,
            latex: raw.latex,
            split: raw.split.unwrap_or_default(),
        };
        pairs.push(pair);
    }
    Dataset::from_pairs(pairs)
}

/// Writes one JSON object per line. Reloading yields identical pairs.
pub fn write_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let path = path.as_ref();
    let io_err = |source| DatasetError::Io { path: path.display().to_string(), source };
    let file = File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    for pair in dataset.pairs() {
        let line = serde_json::to_string(pair).expect("pair serializes");
        writeln!(out, "{line}").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Fractions for train, validation and test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self { train: 0.70, validation: 0.15, test: 0.15 }
    }
}

impl SplitRatios {
    pub fn new(train: f64, validation: f64, test: f64) -> Result<Self, DatasetError> {
        let r = Self { train, validation, test };
        r.check()?;
        Ok(r)
    }

    fn check(&self) -> Result<(), DatasetError> {
        let parts = [self.train, self.validation, self.test];
        let ok = parts.iter().all(|x| x.is_finite() && *x > 0.0)
            && ((parts.iter().sum::<f64>()) - 1.0).abs() <= 1e-9;
        if ok {
            Ok(())
        } else {
            Err(DatasetError::BadRatios((self.train, self.validation, self.test)))
        }
    }

    /// Sizes for `n` items: floor for train and validation, remainder to test.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        // The small epsilon keeps products such as 500 * 0.7 = 349.99999999999994 on 350.
        let floor = |frac: f64| ((n as f64) * frac + 1e-9).floor() as usize;
        let train = floor(self.train).min(n);
        let validation = floor(self.validation).min(n - train);
        (train, validation, n - train - validation)
    }
}

impl FromStr for SplitRatios {
    type Err = DatasetError;

    /// Parses `"0.7,0.15,0.15"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| DatasetError::BadRatios((f64::NAN, f64::NAN, f64::NAN)))?;
        match parts.as_slice() {
            [a, b, c] => SplitRatios::new(*a, *b, *c),
            _ => Err(DatasetError::BadRatios((f64::NAN, f64::NAN, f64::NAN))),
        }
    }
}

/// Shuffles pair positions with a seeded Fisher-Yates pass driven by
/// SplitMix64, then assigns train, validation and test contiguously.
/// The output keeps the input order of pairs; only split tags change.
pub fn split_dataset(dataset: &Dataset, ratios: SplitRatios, seed: u64) -> Result<Dataset, DatasetError> {
    ratios.check()?;
    if dataset.is_empty() {
        return Err(DatasetError::Empty);
    }
    let n = dataset.len();
    let order = shuffled_positions(n, seed);
    let (train, validation, _) = ratios.sizes(n);

    let mut pairs = dataset.pairs.clone();
    for (slot, &pos) in order.iter().enumerate() {
        pairs[pos].split = if slot < train {
            Split::Train
        } else if slot < train + validation {
            Split::Validation
        } else {
            Split::Test
        };
    }
    Dataset::from_pairs(pairs)
}

/// The permutation used by [`split_dataset`]: for `i` from `n-1` down to 1,
/// swap position `i` with `next_u64() % (i + 1)`.
pub fn shuffled_positions(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = SplitMix64::new(seed);
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        order.swap(i, j);
    }
    order
}
