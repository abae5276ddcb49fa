//! Canonical form for LaTeX equations.
//!
//! Two equations that differ only in delimiters, spacing commands, Greek
//! letter spelling, stray sentence punctuation or redundant script braces
//! normalize to the same string. Nothing else is rewritten: `a+b` and `b+a`
//! stay distinct.
//!
//! A single rewrite pass works on the token stream produced by
//! [`tokenize_latex`]:
//!
//! 1. drop delimiter sequences (`$`, `\(`, `\begin{equation}` ...),
//! 2. drop formatting commands (`\left`, `\,`, `\quad` ...),
//! 3. map Greek letters to Latin spellings,
//! 4. optionally lowercase non-command tokens,
//! 5. unwrap `^{t}` / `_{t}` when `t` is one character or one command,
//! 6. trim punctuation tokens from both ends,
//! 7. concatenate without whitespace.
//!
//! Concatenation can fuse tokens (`\le ft` becomes `\left`), so [`Normalizer::normalize`]
//! repeats the pass until the output stops changing. Every pass that changes its
//! input shortens it or removes a non-ASCII or uppercase character, so the loop
//! terminates, and the result is idempotent by construction.

mod tokenize;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use tokenize::tokenize_latex;
use tokenize::is_command;

/// The shipped rule set, version 1.
pub const DEFAULT_CONFIG_TOML: &str = include_str!("../../assets/normalization.v1.toml");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read normalization config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid normalization config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("`{0}` is both a strip token and a greek_map key")]
    Overlap(String),
    #[error("greek_map is missing `{0}`")]
    MissingGreek(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizationConfig {
    pub version: u32,
    pub delimiter_strip_set: Vec<String>,
    pub formatting_command_strip_set: Vec<String>,
    pub greek_map: BTreeMap<String, String>,
    pub punctuation_strip_set: BTreeSet<char>,
    #[serde(default)]
    pub lowercase: bool,
}

impl Default for NormalizationConfig {
    fn default() -> Self {
        toml::from_str(DEFAULT_CONFIG_TOML).expect("shipped normalization config parses")
    }
}

const GREEK_NAMES: [&str; 24] = [
    "alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta", "iota", "kappa", "lambda",
    "mu", "nu", "xi", "omicron", "pi", "rho", "sigma", "tau", "upsilon", "phi", "chi", "psi", "omega",
];

impl NormalizationConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks that every Greek letter is covered in all four spellings and
    /// that no strip token doubles as a Greek key.
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (i, name) in GREEK_NAMES.iter().enumerate() {
            let lower = char::from_u32(0x03B1 + i as u32 + u32::from(i >= 17)).unwrap();
            let upper = char::from_u32(0x0391 + i as u32 + u32::from(i >= 17)).unwrap();
            let mut cap = name.to_string();
            cap[..1].make_ascii_uppercase();
            for key in [format!("\\{name}"), format!("\\{cap}"), lower.to_string(), upper.to_string()] {
                if !self.greek_map.contains_key(&key) {
                    return Err(ConfigError::MissingGreek(key));
                }
            }
        }
        for token in self.delimiter_strip_set.iter().chain(&self.formatting_command_strip_set) {
            if self.greek_map.contains_key(token) {
                return Err(ConfigError::Overlap(token.clone()));
            }
        }
        Ok(())
    }
}

/// A compiled [`NormalizationConfig`].
#[derive(Debug, Clone)]
pub struct Normalizer {
    config: NormalizationConfig,
    /// Delimiter and formatting sequences as token lists, longest first.
    strip: Vec<Vec<String>>,
}

impl Normalizer {
    pub fn new(config: NormalizationConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        Ok(Self::compile(config))
    }

    fn compile(config: NormalizationConfig) -> Self {
        let mut strip: Vec<Vec<String>> = config
            .delimiter_strip_set
            .iter()
            .chain(&config.formatting_command_strip_set)
            .map(|s| tokenize_latex(s).into_iter().map(str::to_owned).collect::<Vec<_>>())
            .filter(|seq| !seq.is_empty())
            .collect();
        strip.sort_by(|a, b| b.len().cmp(&a.len()));
        Self { config, strip }
    }

    /// Shared instance built from the shipped config.
    pub fn shared() -> &'static Normalizer {
        static DEFAULT: OnceLock<Normalizer> = OnceLock::new();
        DEFAULT.get_or_init(|| Normalizer::new(NormalizationConfig::default()).expect("shipped config is valid"))
    }

    pub fn config(&self) -> &NormalizationConfig {
        &self.config
    }

    pub fn normalize(&self, latex: &str) -> String {
        let mut current = self.pass(latex);
        loop {
            let next = self.pass(&current);
            if next == current {
                return current;
            }
            current = next;
        }
    }

    pub fn map_greek<'a>(&'a self, token: &'a str) -> &'a str {
        self.config.greek_map.get(token).map(String::as_str).unwrap_or(token)
    }

    fn pass(&self, input: &str) -> String {
        let raw = tokenize_latex(input);

        let mut kept: Vec<&str> = Vec::with_capacity(raw.len());
        let mut i = 0;
        'outer: while i < raw.len() {
            for seq in &self.strip {
                if raw[i..].len() >= seq.len() && raw[i..i + seq.len()].iter().zip(seq).all(|(a, b)| a == b) {
                    i += seq.len();
                    continue 'outer;
                }
            }
            kept.push(raw[i]);
            i += 1;
        }

        let mut tokens: Vec<String> = kept
            .into_iter()
            .map(|t| {
                let mapped = self.map_greek(t);
                if self.config.lowercase && !is_command(mapped) {
                    mapped.to_lowercase()
                } else {
                    mapped.to_owned()
                }
            })
            .collect();

        let mut out: Vec<String> = Vec::with_capacity(tokens.len());
        let mut i = 0;
        while i < tokens.len() {
            let script = tokens[i] == "^" || tokens[i] == "_";
            if script
                && i + 3 < tokens.len()
                && tokens[i + 1] == "{"
                && tokens[i + 3] == "}"
                && is_atomic(&tokens[i + 2])
            {
                out.push(std::mem::take(&mut tokens[i]));
                out.push(std::mem::take(&mut tokens[i + 2]));
                i += 4;
            } else {
                out.push(std::mem::take(&mut tokens[i]));
                i += 1;
            }
        }

        let punct = |t: &String| {
            let mut chars = t.chars();
            matches!((chars.next(), chars.next()), (Some(c), None) if self.config.punctuation_strip_set.contains(&c))
        };
        let start = out.iter().position(|t| !punct(t)).unwrap_or(out.len());
        let end = out.iter().rposition(|t| !punct(t)).map_or(start, |p| p + 1);
        out[start..end].concat()
    }
}

fn is_atomic(token: &str) -> bool {
    is_command(token) || token.chars().count() == 1
}

/// Normalizes with a freshly compiled `config`, which is not validated.
/// Prefer a reused [`Normalizer`] for batches.
pub fn normalize(latex: &str, config: &NormalizationConfig) -> String {
    Normalizer::compile(config.clone()).normalize(latex)
}

/// Latin spelling of a Greek letter given as a command or a Unicode
/// character; any other token is returned unchanged.
pub fn map_greek(token: &str, config: &NormalizationConfig) -> String {
    config.greek_map.get(token).cloned().unwrap_or_else(|| token.to_owned())
}
