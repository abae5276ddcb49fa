use std::collections::HashMap;

use super::MetricsError;

pub const CHAR_ORDER: usize = 6;
pub const BETA: f64 = 2.0;

/// Sentence chrF averaged over the corpus, scaled to [0, 100].
///
/// Whitespace is removed first. For each sentence, character n-gram
/// precision is averaged over the orders 1..=6 for which the hypothesis has
/// n-grams, and recall over the orders for which the reference has them; the
/// two averages combine into an F-score with recall weighted by `BETA`. Two
/// empty sentences score 1, one empty sentence scores 0.
pub fn chrf<S: AsRef<str>>(hypotheses: &[S], references: &[S]) -> Result<f64, MetricsError> {
    if hypotheses.len() != references.len() {
        return Err(MetricsError::LengthMismatch { hyp: hypotheses.len(), reference: references.len() });
    }
    if hypotheses.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let total: f64 = hypotheses
        .iter()
        .zip(references)
        .map(|(h, r)| sentence_chrf(h.as_ref(), r.as_ref()))
        .sum();
    Ok(100.0 * total / hypotheses.len() as f64)
}

/// chrF of one pair in [0, 1].
pub fn sentence_chrf(hyp: &str, reference: &str) -> f64 {
    let hyp: Vec<char> = hyp.chars().filter(|c| !c.is_whitespace()).collect();
    let reference: Vec<char> = reference.chars().filter(|c| !c.is_whitespace()).collect();
    if hyp.is_empty() && reference.is_empty() {
        return 1.0;
    }

    let (mut precision_sum, mut precision_orders) = (0.0, 0usize);
    let (mut recall_sum, mut recall_orders) = (0.0, 0usize);
    for n in 1..=CHAR_ORDER {
        let h = char_ngrams(&hyp, n);
        let r = char_ngrams(&reference, n);
        let h_total: usize = h.values().sum();
        let r_total: usize = r.values().sum();
        let overlap: usize = h.iter().map(|(g, c)| (*c).min(r.get(g).copied().unwrap_or(0))).sum();
        if h_total > 0 {
            precision_sum += overlap as f64 / h_total as f64;
            precision_orders += 1;
        }
        if r_total > 0 {
            recall_sum += overlap as f64 / r_total as f64;
            recall_orders += 1;
        }
    }
    let precision = if precision_orders == 0 { 0.0 } else { precision_sum / precision_orders as f64 };
    let recall = if recall_orders == 0 { 0.0 } else { recall_sum / recall_orders as f64 };
    let b2 = BETA * BETA;
    let denom = b2 * precision + recall;
    if denom == 0.0 {
        0.0
    } else {
        (1.0 + b2) * precision * recall / denom
    }
}

fn char_ngrams(chars: &[char], n: usize) -> HashMap<&[char], usize> {
    let mut counts = HashMap::new();
    if chars.len() >= n {
        for w in chars.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}
