//! Implementation-vs-oracle checks and frozen hand-derived values.

mod common;

use common::*;
use texvox_core::metrics::{bleu, chrf, el_distance, levenshtein};
use texvox_core::retrieval::{build_index, HashedTrigramEmbedder, Measure};
use texvox_core::Normalizer;

#[test]
fn levenshtein_matches_dp_matrix() {
    let mut rng = xorshift(99);
    let alphabet: Vec<char> = "abcxyz+-^{}\\αβ".chars().collect();
    for _ in 0..2_000 {
        let s = |rng: &mut dyn FnMut() -> u64| {
            let len = (rng() % 21) as usize;
            (0..len).map(|_| alphabet[(rng() % alphabet.len() as u64) as usize]).collect::<String>()
        };
        let a = s(&mut rng);
        let b = s(&mut rng);
        assert_eq!(levenshtein(&a, &b), dp_levenshtein(&a, &b), "{a:?} vs {b:?}");
    }
    assert_eq!(dp_levenshtein("kitten", "sitting"), 3);
}

#[test]
fn el_fraction_from_oracle() {
    let s = el_distance("a+b", "a-b", Normalizer::shared());
    let oracle = dp_levenshtein("a+b", "a-b") as f64 / 3.0;
    assert_eq!(s.value, oracle);
    assert!((s.value - 0.3333).abs() < 1e-4);
}

#[test]
fn bleu_frozen_values() {
    // Frozen from the n-gram counting oracle: (2/3 · 1/2 · 1/2 · 1)^(1/4) · 100.
    let h = vec![vec!["a", "+", "b"]];
    let r = vec![vec!["a", "+", "c"]];
    assert!((bleu_oracle(&h, &r) - 63.89431042462724).abs() < 1e-9);
    assert!((bleu(&h, &r).unwrap() - 63.89431042462724).abs() < 1e-9);

    let h = vec![vec!["\\frac", "{", "1", "}", "{", "2", "}"], vec!["x", "^", "2", "+", "y"]];
    let r = vec![vec!["\\frac", "{", "1", "}", "{", "3", "}"], vec!["x", "^", "2", "+", "y", "^", "2"]];
    assert!((bleu_oracle(&h, &r) - 65.86966336912118).abs() < 1e-9);
    assert!((bleu(&h, &r).unwrap() - 65.86966336912118).abs() < 1e-9);
}

#[test]
fn chrf_frozen_values() {
    // Orders 1..3 exist: P = R = (2/3 + 1/2 + 0) / 3 = 7/18.
    assert!((chrf_oracle(&["a+b"], &["a+c"]) - 700.0 / 18.0).abs() < 1e-9);
    assert!((chrf(&["a+b"], &["a+c"]).unwrap() - 700.0 / 18.0).abs() < 1e-9);
    let h = ["x^2+y", "\\frac{1}{2}"];
    let r = ["x^2+y^2", "\\frac{1}{3}"];
    assert!((chrf_oracle(&h, &r) - 64.72052097451672).abs() < 1e-9);
    assert!((chrf(&h, &r).unwrap() - 64.72052097451672).abs() < 1e-9);
}

#[test]
fn bleu_chrf_match_oracles_on_random_corpora() {
    let mut rng = xorshift(7);
    let vocab = ["x", "y", "+", "=", "^", "2", "{", "}", "\\frac", "\\alpha"];
    for _ in 0..200 {
        let n = 1 + (rng() % 4) as usize;
        let sent = |rng: &mut dyn FnMut() -> u64| -> Vec<&str> {
            let len = 1 + (rng() % 9) as usize;
            (0..len).map(|_| vocab[(rng() % vocab.len() as u64) as usize]).collect()
        };
        let hyps: Vec<Vec<&str>> = (0..n).map(|_| sent(&mut rng)).collect();
        let refs: Vec<Vec<&str>> = (0..n).map(|_| sent(&mut rng)).collect();
        let got = bleu(&hyps, &refs).unwrap();
        assert!((got - bleu_oracle(&hyps, &refs)).abs() < 1e-9);

        let hs: Vec<String> = hyps.iter().map(|t| t.concat()).collect();
        let rs: Vec<String> = refs.iter().map(|t| t.concat()).collect();
        let hs: Vec<&str> = hs.iter().map(String::as_str).collect();
        let rs: Vec<&str> = rs.iter().map(String::as_str).collect();
        assert!((chrf(&hs, &rs).unwrap() - chrf_oracle(&hs, &rs)).abs() < 1e-9);
    }
}

#[test]
fn knn_matches_linear_scan() {
    let pairs = random_pairs(50, 11);
    let index = futures::executor::block_on(build_index(&pairs, &HashedTrigramEmbedder)).unwrap();
    let entries: Vec<(String, Vec<f64>)> =
        index.entries().iter().map(|e| (e.id.clone(), e.values.values().to_vec())).collect();
    let mut rng = xorshift(5);
    for _ in 0..20 {
        let text = random_description(&mut rng);
        let q = HashedTrigramEmbedder.embed_text(&text).unwrap();
        for (m, om) in [
            (Measure::Cosine, OracleMeasure::Cosine),
            (Measure::Euclidean, OracleMeasure::Euclidean),
            (Measure::Manhattan, OracleMeasure::Manhattan),
        ] {
            let k = 1 + (rng() % 8) as usize;
            let got: Vec<String> =
                index.query_vector(&q, k, m, &[]).unwrap().results.into_iter().map(|r| r.pair_id).collect();
            let want: Vec<String> = scan_oracle(&entries, q.values(), k, om).into_iter().map(|r| r.0).collect();
            assert_eq!(got, want, "{m} k={k} {text}");
        }
    }
}

#[test]
fn disjoint_trigrams_give_zero_cosine() {
    let a = "αβγ";
    let b = "xyz";
    let ba: Vec<usize> = HashedTrigramEmbedder::trigrams(a).iter().map(|g| HashedTrigramEmbedder::bucket(g)).collect();
    let bb: Vec<usize> = HashedTrigramEmbedder::trigrams(b).iter().map(|g| HashedTrigramEmbedder::bucket(g)).collect();
    assert!(ba.iter().all(|x| !bb.contains(x)), "bucket collision: {ba:?} {bb:?}");
    let va = HashedTrigramEmbedder.embed_text(a).unwrap();
    let vb = HashedTrigramEmbedder.embed_text(b).unwrap();
    assert_eq!(texvox_core::retrieval::cosine(&va, &vb).unwrap(), 0.0);
}

#[test]
fn disjoint_characters_give_zero_chrf() {
    assert_eq!(chrf(&["abc", "xy"], &["123", "+-"]).unwrap(), 0.0);
    assert_eq!(chrf_oracle(&["abc"], &["123"]), 0.0);
}

#[test]
fn every_entry_retrieves_itself_first() {
    let pairs = random_pairs(50, 12);
    let index = futures::executor::block_on(build_index(&pairs, &HashedTrigramEmbedder)).unwrap();
    for p in &pairs {
        let q = HashedTrigramEmbedder.embed_text(&p.nl_text).unwrap();
        for m in Measure::ALL {
            let top = &index.query_vector(&q, 1, m, &[]).unwrap().results[0];
            assert_eq!(top.pair_id, p.id, "{m}");
        }
    }
}

#[test]
fn cosine_and_euclidean_rank_alike_on_unit_vectors() {
    let pairs = random_pairs(40, 13);
    let index = futures::executor::block_on(build_index(&pairs, &HashedTrigramEmbedder)).unwrap();
    let mut rng = xorshift(17);
    for _ in 0..20 {
        let q = HashedTrigramEmbedder.embed_text(&random_description(&mut rng)).unwrap();
        // Orderings agree up to floating-point ties (orthogonal entries all sit at cosine 0).
        let cos: std::collections::HashMap<String, f64> = index
            .query_vector(&q, 40, Measure::Cosine, &[])
            .unwrap()
            .results
            .into_iter()
            .map(|r| (r.pair_id, r.score))
            .collect();
        let by_dist = index.query_vector(&q, 40, Measure::Euclidean, &[]).unwrap().results;
        for w in by_dist.windows(2) {
            assert!(cos[&w[0].pair_id] >= cos[&w[1].pair_id] - 1e-12, "{} before {}", w[0].pair_id, w[1].pair_id);
        }
    }
}
