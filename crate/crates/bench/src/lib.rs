//! Deterministic inputs shared by the benchmarks.

use texvox_core::dataset::EquationPair;

const WORDS: &[&str] = &[
    "χ", "ψ", "ζήτα", "συν", "μείον", "επί", "προς", "στο", "τετράγωνο", "κύβο", "ρίζα", "άλφα", "βήτα",
    "ολοκλήρωμα", "άθροισμα", "από", "έως", "ίσον", "ημίτονο", "λογάριθμος",
];

const ATOMS: &[&str] = &[
    "x", "y", "+", "-", "^{2}", "_{i}", "\\alpha", "\\beta", "\\frac{a}{b}", "\\sqrt{2}", "\\sum_{i=1}^{n}", "=", " ",
];

fn next(state: &mut u64) -> u64 {
    *state ^= *state << 13;
    *state ^= *state >> 7;
    *state ^= *state << 17;
    *state
}

fn pick<'a>(state: &mut u64, from: &[&'a str], len: usize) -> Vec<&'a str> {
    (0..len).map(|_| from[(next(state) % from.len() as u64) as usize]).collect()
}

/// A LaTeX-looking string of `atoms` fragments.
pub fn latex(seed: u64, atoms: usize) -> String {
    let mut s = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    pick(&mut s, ATOMS, atoms).concat()
}

/// `n` pairs with distinct ids and varied descriptions.
pub fn pairs(n: usize, seed: u64) -> Vec<EquationPair> {
    let mut s = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    (0..n)
        .map(|i| {
            let len = 4 + (next(&mut s) % 8) as usize;
            let nl = pick(&mut s, WORDS, len).join(" ");
            EquationPair::new(format!("b{i:05}"), nl, latex(seed + i as u64, 12))
        })
        .collect()
}
