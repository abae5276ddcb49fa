//! Independent reference implementations used as test oracles, plus input
//! generators. Nothing here calls into the code it checks.

#![allow(dead_code)]

use proptest::prelude::*;
use texvox_core::dataset::EquationPair;

/// Full (n+1)×(m+1) edit matrix.
pub fn dp_levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let cost = if a[i - 1] == b[j - 1] { 0 } else { 1 };
            d[i][j] = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + cost);
        }
    }
    d[a.len()][b.len()]
}

/// All n-grams as a list, counted by linear search.
fn count_in<T: PartialEq + Clone>(grams: &[Vec<T>], g: &[T]) -> usize {
    grams.iter().filter(|x| x.as_slice() == g).count()
}

fn grams<T: Clone>(items: &[T], n: usize) -> Vec<Vec<T>> {
    if items.len() < n {
        return vec![];
    }
    (0..=items.len() - n).map(|i| items[i..i + n].to_vec()).collect()
}

/// Clipped matches and total hypothesis n-grams for one sentence.
fn clipped<T: PartialEq + Clone>(hyp: &[T], reference: &[T], n: usize) -> (usize, usize) {
    let h = grams(hyp, n);
    let r = grams(reference, n);
    let mut seen: Vec<Vec<T>> = Vec::new();
    let mut matched = 0;
    for g in &h {
        if seen.iter().any(|s| s == g) {
            continue;
        }
        seen.push(g.clone());
        matched += count_in(&h, g).min(count_in(&r, g));
    }
    (matched, h.len())
}

/// Corpus BLEU-4 with add-one on zero higher-order matches.
pub fn bleu_oracle(hyps: &[Vec<&str>], refs: &[Vec<&str>]) -> f64 {
    let mut m = [0usize; 4];
    let mut t = [0usize; 4];
    let (mut c, mut r) = (0usize, 0usize);
    for (h, rf) in hyps.iter().zip(refs) {
        c += h.len();
        r += rf.len();
        for n in 1..=4 {
            let (mm, tt) = clipped(h, rf, n);
            m[n - 1] += mm;
            t[n - 1] += tt;
        }
    }
    if c == 0 || m[0] == 0 {
        return 0.0;
    }
    let mut log = 0.0;
    for i in 0..4 {
        let p = if i > 0 && m[i] == 0 { 1.0 / (t[i] as f64 + 1.0) } else { m[i] as f64 / t[i] as f64 };
        log += p.ln();
    }
    let bp = if c >= r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    100.0 * bp * (log / 4.0).exp()
}

/// Sentence-averaged chrF, n = 1..6, β = 2.
pub fn chrf_oracle(hyps: &[&str], refs: &[&str]) -> f64 {
    let mut total = 0.0;
    for (h, r) in hyps.iter().zip(refs) {
        let h: Vec<char> = h.chars().filter(|c| !c.is_whitespace()).collect();
        let r: Vec<char> = r.chars().filter(|c| !c.is_whitespace()).collect();
        if h.is_empty() && r.is_empty() {
            total += 1.0;
            continue;
        }
        let (mut ps, mut rs) = (Vec::new(), Vec::new());
        for n in 1..=6 {
            let (overlap, h_total) = clipped(&h, &r, n);
            let r_total = grams(&r, n).len();
            if h_total > 0 {
                ps.push(overlap as f64 / h_total as f64);
            }
            if r_total > 0 {
                rs.push(overlap as f64 / r_total as f64);
            }
        }
        let p = if ps.is_empty() { 0.0 } else { ps.iter().sum::<f64>() / ps.len() as f64 };
        let rc = if rs.is_empty() { 0.0 } else { rs.iter().sum::<f64>() / rs.len() as f64 };
        total += if 4.0 * p + rc == 0.0 { 0.0 } else { 5.0 * p * rc / (4.0 * p + rc) };
    }
    100.0 * total / hyps.len() as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleMeasure {
    Cosine,
    Euclidean,
    Manhattan,
}

/// Scores every entry and ranks them by full comparison, position breaking ties.
pub fn scan_oracle(entries: &[(String, Vec<f64>)], query: &[f64], k: usize, measure: OracleMeasure) -> Vec<(String, f64)> {
    let mut scored: Vec<(usize, f64)> = entries
        .iter()
        .enumerate()
        .map(|(i, (_, v))| {
            let s = match measure {
                OracleMeasure::Cosine => {
                    let mut d = 0.0;
                    for j in 0..v.len() {
                        d += query[j] * v[j];
                    }
                    let mut nq = 0.0;
                    for x in query {
                        nq += x * x;
                    }
                    let mut nv = 0.0;
                    for x in v {
                        nv += x * x;
                    }
                    d / (f64::sqrt(nq) * f64::sqrt(nv))
                }
                OracleMeasure::Euclidean => {
                    let mut s = 0.0;
                    for j in 0..v.len() {
                        s += (query[j] - v[j]) * (query[j] - v[j]);
                    }
                    s.sqrt()
                }
                OracleMeasure::Manhattan => {
                    let mut s = 0.0;
                    for j in 0..v.len() {
                        s += (query[j] - v[j]).abs();
                    }
                    s
                }
            };
            (i, s)
        })
        .collect();
    // Selection by repeated extraction of the best remaining entry.
    let mut out = Vec::new();
    while out.len() < k && !scored.is_empty() {
        let mut best = 0;
        for c in 1..scored.len() {
            let better = match measure {
                OracleMeasure::Cosine => scored[c].1 > scored[best].1,
                _ => scored[c].1 < scored[best].1,
            };
            if better {
                best = c;
            }
        }
        let (i, s) = scored.remove(best);
        out.push((entries[i].0.clone(), s));
    }
    out
}

const WORDS: &[&str] = &[
    "άλφα", "βήτα", "γάμμα", "συν", "πλην", "επί", "διά", "ίσον", "τετράγωνο", "κύβος", "ρίζα", "του", "χ", "ψ",
    "ολοκλήρωμα", "παράγωγος", "ημίτονο", "συνημίτονο", "λογάριθμος", "όριο", "άθροισμα", "από", "έως", "ένα",
    "δύο", "τρία", "πέντε", "κλάσμα", "εκθέτης", "δείκτης", "μεγαλύτερο", "μικρότερο",
];

/// A deterministic random Greek equation description.
pub fn random_description(rng: &mut impl FnMut() -> u64) -> String {
    let len = 2 + (rng() % 6) as usize;
    (0..len).map(|_| WORDS[(rng() % WORDS.len() as u64) as usize]).collect::<Vec<_>>().join(" ")
}

pub fn xorshift(seed: u64) -> impl FnMut() -> u64 {
    let mut s = seed.max(1);
    move || {
        s ^= s << 13;
        s ^= s >> 7;
        s ^= s << 17;
        s
    }
}

/// `n` pairs with distinct descriptions.
pub fn random_pairs(n: usize, seed: u64) -> Vec<EquationPair> {
    let mut rng = xorshift(seed);
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    while out.len() < n {
        let text = random_description(&mut rng);
        if seen.insert(text.clone()) {
            let i = out.len();
            out.push(EquationPair::new(format!("eq{i:03}"), text, format!("x_{{{i}}}+y^{}", i % 7)));
        }
    }
    out
}

/// Atoms drawn to build LaTeX-like strings. None ends in a bare backslash.
pub const LATEX_ATOMS: &[&str] = &[
    "x", "y", "z", "a", "b", "12", "3", "+", "-", "=", "^", "_", "{", "}", "(", ")", "[", "]", ",", ".", ";", "!",
    "?", "\\frac", "\\sqrt", "\\sum", "\\int", "\\lim", "\\sin", "\\cos", "\\log", "\\cdot", "\\infty", "\\alpha",
    "\\beta", "\\Gamma", "\\theta", "\\xi", "\\chi", "\\pi", "\\Omega", "α", "β", "Σ", "ω", "\\left", "\\right",
    "\\,", "\\;", "\\quad", "\\qquad", "\\displaystyle", "$", "$$", "\\(", "\\)", "\\[", "\\]", "\\begin{equation}",
    "\\end{equation}", "\\begin{equation*}", "\\leq", "\\to", " ", "  ",
];

pub fn latex_like() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(LATEX_ATOMS), 0..24).prop_map(|atoms| atoms.concat())
}
