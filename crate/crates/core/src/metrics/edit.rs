use serde::{Deserialize, Serialize};

use crate::normalizer::Normalizer;

/// Levenshtein distance over Unicode scalar values, two-row dynamic programming.
pub fn levenshtein(a: &str, b: &str) -> usize {
    if a == b {
        return 0;
    }
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    // Keep the row over the shorter string.
    let (long, short) = if a.len() >= b.len() { (&a, &b) } else { (&b, &a) };
    if short.is_empty() {
        return long.len();
    }

    let mut prev: Vec<usize> = (0..=short.len()).collect();
    let mut curr = vec![0; short.len() + 1];
    for (i, lc) in long.iter().enumerate() {
        curr[0] = i + 1;
        for (j, sc) in short.iter().enumerate() {
            let substitution = prev[j] + usize::from(lc != sc);
            curr[j + 1] = substitution.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[short.len()]
}

/// Normalized edit distance between two equations after canonicalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElScore {
    pub value: f64,
    pub raw_edits: usize,
    pub hyp_norm_len: usize,
    pub ref_norm_len: usize,
}

impl ElScore {
    /// Builds a score from an edit count and the two normalized lengths.
    /// Both lengths zero gives 0.
    pub fn from_parts(raw_edits: usize, hyp_norm_len: usize, ref_norm_len: usize) -> Self {
        let denom = hyp_norm_len.max(ref_norm_len);
        let value = if denom == 0 { 0.0 } else { raw_edits as f64 / denom as f64 };
        Self { value, raw_edits, hyp_norm_len, ref_norm_len }
    }

    /// A bare value, for thresholding scores that were computed elsewhere.
    pub fn from_value(value: f64) -> Self {
        Self { value, raw_edits: 0, hyp_norm_len: 0, ref_norm_len: 0 }
    }
}

/// EL: edit distance between the normalized forms divided by the longer
/// normalized length.
pub fn el_distance(hyp: &str, reference: &str, normalizer: &Normalizer) -> ElScore {
    let h = normalizer.normalize(hyp);
    let r = normalizer.normalize(reference);
    ElScore::from_parts(levenshtein(&h, &r), h.chars().count(), r.chars().count())
}
