use std::collections::HashMap;

use super::MetricsError;

pub const MAX_ORDER: usize = 4;

/// Corpus BLEU-4 on token sequences, scaled to [0, 100].
///
/// Clipped n-gram matches and hypothesis n-gram totals are summed over the
/// corpus for n = 1..4. A higher-order precision with zero matches is
/// smoothed to `1 / (total + 1)`; a zero unigram precision is not smoothed,
/// so a corpus with no shared tokens scores 0. The brevity penalty is
/// `exp(1 - r/c)` when the hypothesis length `c` is below the reference
/// length `r`.
pub fn bleu<S: AsRef<str>>(hypotheses: &[Vec<S>], references: &[Vec<S>]) -> Result<f64, MetricsError> {
    if hypotheses.len() != references.len() {
        return Err(MetricsError::LengthMismatch { hyp: hypotheses.len(), reference: references.len() });
    }
    if hypotheses.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }

    let mut matches = [0usize; MAX_ORDER];
    let mut totals = [0usize; MAX_ORDER];
    let mut hyp_len = 0;
    let mut ref_len = 0;
    for (hyp, reference) in hypotheses.iter().zip(references) {
        let hyp: Vec<&str> = hyp.iter().map(AsRef::as_ref).collect();
        let reference: Vec<&str> = reference.iter().map(AsRef::as_ref).collect();
        hyp_len += hyp.len();
        ref_len += reference.len();
        for n in 1..=MAX_ORDER {
            let ref_counts = ngram_counts(&reference, n);
            for (gram, count) in ngram_counts(&hyp, n) {
                matches[n - 1] += count.min(ref_counts.get(gram).copied().unwrap_or(0));
                totals[n - 1] += count;
            }
        }
    }

    if hyp_len == 0 || matches[0] == 0 {
        return Ok(0.0);
    }
    let log_sum: f64 = (0..MAX_ORDER)
        .map(|i| {
            let p = if i > 0 && matches[i] == 0 {
                1.0 / (totals[i] as f64 + 1.0)
            } else {
                matches[i] as f64 / totals[i] as f64
            };
            p.ln()
        })
        .sum();
    let brevity = if hyp_len >= ref_len { 1.0 } else { (1.0 - ref_len as f64 / hyp_len as f64).exp() };
    Ok(100.0 * brevity * (log_sum / MAX_ORDER as f64).exp())
}

fn ngram_counts<'a>(tokens: &'a [&'a str], n: usize) -> HashMap<&'a [&'a str], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            *counts.entry(window).or_insert(0) += 1;
        }
    }
    counts
}
