//! Cross-checks between the sampled explainers and their exact oracles.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wordlens::anchors::{
    empirical_precision, exact_precision_bruteforce, exact_precision_dnf, search_anchor_beam,
    search_anchor_exhaustive,
};
use wordlens::lime::{exact_expected_explanation, explain_lime, fit_surrogate, LimeSample};
use wordlens::{AnchorConfig, Document, DnfClassifier, LimeConfig, Occurrences};

const WORDS: [&str; 10] = [
    "good", "bad", "not", "very", "nice", "food", "was", "the", "service", "slow",
];

/// A document over at most `max_d` distinct words, each repeated 1..=`max_m`
/// times, and a DNF whose clauses mostly use words of the document.
fn random_instance(rng: &mut ChaCha8Rng, max_d: usize, max_m: usize) -> (Document, DnfClassifier) {
    let d = rng.random_range(1..=max_d);
    let mut pool = WORDS.to_vec();
    pool.shuffle(rng);
    let present = &pool[..d];
    let mut tokens = Vec::new();
    for w in present {
        for _ in 0..rng.random_range(1..=max_m) {
            tokens.push(*w);
        }
    }
    tokens.shuffle(rng);
    let n_clauses = rng.random_range(1..=3);
    let clauses: Vec<Vec<&str>> = (0..n_clauses)
        .map(|_| {
            let len = rng.random_range(1..=3);
            (0..len)
                .map(|_| {
                    if rng.random_bool(0.85) {
                        present[rng.random_range(0..d)]
                    } else {
                        pool[rng.random_range(0..pool.len())]
                    }
                })
                .collect()
        })
        .collect();
    (Document::from_tokens(tokens), DnfClassifier::new(clauses).unwrap())
}

fn random_positions(rng: &mut ChaCha8Rng, doc: &Document) -> Vec<usize> {
    (0..doc.len()).filter(|_| rng.random_bool(0.3)).collect()
}

#[test]
fn closed_form_precision_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let (doc, clf) = random_instance(&mut rng, 8, 2);
        let positions = random_positions(&mut rng, &doc);
        let exact = exact_precision_dnf(&clf, &doc, &positions).unwrap();
        let brute = exact_precision_bruteforce(&clf, &doc, &positions).unwrap();
        assert!((exact - brute).abs() <= 1e-12, "{doc} {clf:?} {positions:?}: {exact} vs {brute}");
    }
}

#[test]
fn sampled_precision_is_close_to_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cfg = AnchorConfig {
        batch_size: 100,
        max_batches: 100,
        ..AnchorConfig::default()
    };
    for i in 0..50 {
        let (doc, clf) = random_instance(&mut rng, 8, 2);
        let positions = random_positions(&mut rng, &doc);
        let exact = exact_precision_dnf(&clf, &doc, &positions).unwrap();
        let mut sampler = ChaCha8Rng::seed_from_u64(i);
        let est = empirical_precision(&clf, &doc, &positions, &cfg, &mut sampler).unwrap();
        assert_eq!(est.n_samples, 10_000);
        assert!((est.mean - exact).abs() <= 0.02, "{doc}: {} vs {exact}", est.mean);
    }
}

#[test]
fn precision_is_monotone_in_the_anchor() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..100 {
        let (doc, clf) = random_instance(&mut rng, 8, 3);
        let mut positions = Vec::new();
        let mut order: Vec<usize> = (0..doc.len()).collect();
        order.shuffle(&mut rng);
        let mut last = exact_precision_dnf(&clf, &doc, &positions).unwrap();
        for p in order {
            positions.push(p);
            positions.sort_unstable();
            let next = exact_precision_dnf(&clf, &doc, &positions).unwrap();
            assert!(next >= last - 1e-12, "{doc}: {last} -> {next}");
            last = next;
        }
        assert!((last - 1.0).abs() <= 1e-12);
    }
}

fn independent_wls(samples: &[LimeSample], ridge: f64) -> DVector<f64> {
    let d = samples[0].mask.len();
    let x = DMatrix::from_fn(samples.len(), d + 1, |i, j| {
        if j == 0 || samples[i].mask[j - 1] {
            1.0
        } else {
            0.0
        }
    });
    let w = DMatrix::from_diagonal(&DVector::from_iterator(
        samples.len(),
        samples.iter().map(|s| s.weight),
    ));
    let y = DVector::from_iterator(samples.len(), samples.iter().map(|s| f64::from(s.label.unwrap())));
    let mut penalty = DMatrix::identity(d + 1, d + 1) * ridge;
    penalty[(0, 0)] = 0.0;
    let lhs = x.transpose() * &w * &x + penalty;
    let rhs = x.transpose() * &w * y;
    lhs.lu().solve(&rhs).expect("nonsingular system")
}

#[test]
fn surrogate_solves_the_weighted_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..100 {
        let d = rng.random_range(1..=8);
        let n = rng.random_range(2 * (d + 1)..200);
        let samples: Vec<LimeSample> = (0..n)
            .map(|_| {
                let mask: Vec<bool> = (0..d).map(|_| rng.random_bool(0.5)).collect();
                LimeSample {
                    deleted: (0..d).filter(|&j| !mask[j]).collect(),
                    mask,
                    label: Some(rng.random_range(0..=1)),
                    weight: rng.random_range(0.01..1.0),
                }
            })
            .collect();
        let ridge = 1e-3;
        let fit = fit_surrogate(&samples, ridge).unwrap();
        let oracle = independent_wls(&samples, ridge);
        let scale = oracle.amax().max(1.0);
        assert!((fit.intercept - oracle[0]).abs() <= 1e-10 * scale);
        for (j, c) in fit.coefficients.iter().enumerate() {
            assert!((c - oracle[j + 1]).abs() <= 1e-10 * scale, "{c} vs {}", oracle[j + 1]);
        }
    }
}

#[test]
fn sampled_lime_converges_to_the_population_surrogate() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    for i in 0..20 {
        let (doc, clf) = random_instance(&mut rng, 6, 2);
        let cfg = LimeConfig {
            n_samples: 10_000,
            seed: i,
            ..LimeConfig::default()
        };
        let sampled = explain_lime(&clf, &doc, &cfg).unwrap();
        let exact = exact_expected_explanation(&clf, &doc, cfg.kernel_width, cfg.ridge).unwrap();
        assert_eq!(sampled.words, exact.words);
        for (a, b) in sampled.coefficients.iter().zip(&exact.coefficients) {
            assert!((a - b).abs() <= 0.05, "{doc} {clf:?}: {a} vs {b}");
        }
    }
}

#[test]
fn conjunction_words_get_equal_population_weight() {
    let clf = DnfClassifier::all_of(["good", "nice"]).unwrap();
    let doc = Document::tokenize("the food was good and nice");
    let exp = exact_expected_explanation(&clf, &doc, 0.25, 1e-8).unwrap();
    let c = |w: &str| exp.coefficient(w).unwrap();
    assert!((c("good") - c("nice")).abs() <= 1e-10);
    for w in ["food", "was", "and"] {
        assert!((c(w) - c("the")).abs() <= 1e-10);
    }
    assert!(c("good") > c("the"));
}

#[test]
fn population_surrogate_ignores_multiplicity() {
    let clf = DnfClassifier::new(vec![vec!["not", "bad"], vec!["good"]]).unwrap();
    let once = exact_expected_explanation(&clf, &Document::tokenize("not bad good food"), 0.25, 1e-8).unwrap();
    let many = exact_expected_explanation(&clf, &Document::tokenize("not bad bad good food not bad"), 0.25, 1e-8)
        .unwrap();
    for w in ["not", "bad", "good", "food"] {
        assert!((once.coefficient(w).unwrap() - many.coefficient(w).unwrap()).abs() <= 1e-10);
    }
}

#[test]
fn exhaustive_anchor_is_minimal() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let eps = 0.05;
    for _ in 0..100 {
        let (doc, clf) = random_instance(&mut rng, 6, 3);
        let anchor =
            search_anchor_exhaustive(&doc, eps, Occurrences::First, |p| exact_precision_dnf(&clf, &doc, p)).unwrap();
        let dict = doc.local_dictionary();
        let reaches = |bits: u32| exact_precision_dnf(&clf, &doc, &first_positions(&dict, bits)).unwrap() >= 1.0 - eps;
        let k = anchor.distinct_words().len();
        for bits in 0u32..(1 << dict.len()) {
            if (bits.count_ones() as usize) < k {
                assert!(!reaches(bits), "{doc} {clf:?}: smaller anchor {bits:b} exists");
            }
        }
        assert!(anchor.precision >= 1.0 - eps);
    }
}

fn first_positions(dict: &wordlens::LocalDictionary, bits: u32) -> Vec<usize> {
    let mut positions: Vec<usize> = (0..dict.len())
        .filter(|j| bits & (1 << j) != 0)
        .map(|j| dict.entries()[j].first_position())
        .collect();
    positions.sort_unstable();
    positions
}

#[test]
fn beam_mostly_agrees_with_exhaustive() {
    let mut agree = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let (doc, clf) = random_instance(&mut rng, 8, 2);
        let exhaustive =
            search_anchor_exhaustive(&doc, 0.05, Occurrences::First, |p| exact_precision_dnf(&clf, &doc, p)).unwrap();
        let cfg = AnchorConfig {
            seed,
            ..AnchorConfig::default()
        };
        let beam = search_anchor_beam(&clf, &doc, &cfg).unwrap();
        if beam.distinct_words() == exhaustive.distinct_words() {
            agree += 1;
        }
    }
    assert!(agree >= 90, "beam agreed with exhaustive on {agree}/100 seeds");
}

fn relabel(doc: &Document, from: &[&str], to: &[&str]) -> Document {
    Document::from_tokens(doc.tokens().iter().map(|t| {
        from.iter()
            .position(|w| w == t)
            .map(|i| to[i].to_owned())
            .unwrap_or_else(|| t.clone())
    }))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn population_surrogate_is_relabeling_equivariant(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (doc, clf) = random_instance(&mut rng, 6, 2);
        let fresh: Vec<&str> = vec!["alpha", "beta", "gamma", "delta", "eps", "zeta", "eta", "theta", "iota", "kappa"];
        let renamed_doc = relabel(&doc, &WORDS, &fresh);
        let renamed_clauses: Vec<Vec<String>> = clf
            .clauses()
            .iter()
            .map(|c| c.iter().map(|w| fresh[WORDS.iter().position(|x| x == w).unwrap()].to_owned()).collect())
            .collect();
        let renamed_clf = DnfClassifier::new(renamed_clauses).unwrap();
        let a = exact_expected_explanation(&clf, &doc, 0.25, 1e-8).unwrap();
        let b = exact_expected_explanation(&renamed_clf, &renamed_doc, 0.25, 1e-8).unwrap();
        for (w, c) in a.iter() {
            let renamed = fresh[WORDS.iter().position(|x| *x == w).unwrap()];
            prop_assert!((c - b.coefficient(renamed).unwrap()).abs() <= 1e-10);
        }
    }

    #[test]
    fn precision_oracles_agree(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (doc, clf) = random_instance(&mut rng, 8, 2);
        let positions = random_positions(&mut rng, &doc);
        let exact = exact_precision_dnf(&clf, &doc, &positions).unwrap();
        let brute = exact_precision_bruteforce(&clf, &doc, &positions).unwrap();
        prop_assert!((exact - brute).abs() <= 1e-12);
    }
}
