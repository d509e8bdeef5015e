//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails or exceeds its runtime budget.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tempfile::TempDir;

use wordlens::anchors::{
    empirical_precision, exact_precision_bruteforce, exact_precision_dnf, search_anchor_beam,
    search_anchor_exhaustive,
};
use wordlens::lime::{exact_expected_explanation, explain_lime, fit_surrogate, LimeSample};
use wordlens::{
    load_corpus_csv, AnchorConfig, Classifier, DnfClassifier, Document, LimeConfig, LogisticClassifier, Occurrences,
    TfIdfVectorizer,
};

type Check = std::result::Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn sorted(mut words: Vec<String>) -> Vec<String> {
    words.sort();
    words
}

fn exhaustive_dnf(clf: &DnfClassifier, doc: &Document, eps: f64) -> wordlens::Anchor {
    search_anchor_exhaustive(doc, eps, Occurrences::First, |p| exact_precision_dnf(clf, doc, p)).unwrap()
}

/// Mean LIME coefficient per word over seeds `0..runs`.
fn mean_lime<C: Classifier>(f: &C, doc: &Document, n_samples: usize, runs: u64) -> BTreeMap<String, f64> {
    let mut sums: BTreeMap<String, f64> = BTreeMap::new();
    for seed in 0..runs {
        let cfg = LimeConfig {
            n_samples,
            seed,
            ..LimeConfig::default()
        };
        for (w, c) in explain_lime(f, doc, &cfg).unwrap().iter() {
            *sums.entry(w.to_owned()).or_default() += c;
        }
    }
    sums.values_mut().for_each(|v| *v /= runs as f64);
    sums
}

fn beam_hits<C: Classifier>(f: &C, doc: &Document, expected: &[&str], seeds: u64) -> usize {
    (0..seeds)
        .filter(|&seed| {
            let cfg = AnchorConfig {
                seed,
                ..AnchorConfig::default()
            };
            search_anchor_beam(f, doc, &cfg).unwrap().distinct_words() == expected
        })
        .count()
}

fn single_word_rule() -> Check {
    let clf = DnfClassifier::word("good").unwrap();
    let doc = Document::tokenize("the food was good and the service was quite nice");
    ensure(doc.len() == 10, "document must have 10 tokens")?;
    let exhaustive = exhaustive_dnf(&clf, &doc, 0.05);
    ensure(exhaustive.words == ["good"], format!("exhaustive anchor {:?}", exhaustive.words))?;
    let hits = beam_hits(&clf, &doc, &["good"], 100);
    ensure(hits >= 95, format!("beam returned {{good}} in {hits}/100 seeds"))?;
    let means = mean_lime(&clf, &doc, 1000, 100);
    let good = means["good"];
    let other = means.iter().filter(|(w, _)| *w != "good").map(|(_, v)| v.abs()).fold(0.0, f64::max);
    ensure(good > 10.0 * other, format!("mean beta_good {good:.4} vs max other {other:.4}"))?;
    Ok(format!("beam {hits}/100, beta_good {good:.3}, max |other| {other:.4}"))
}

fn shortest_anchor() -> Check {
    let clf = DnfClassifier::new(vec![vec!["not", "bad"], vec!["good"]]).unwrap();
    let doc = Document::tokenize("the food was not bad and the service was good");
    let anchor = exhaustive_dnf(&clf, &doc, 0.05);
    ensure(anchor.words == ["good"], format!("exhaustive anchor {:?}", anchor.words))?;
    let means = mean_lime(&clf, &doc, 5000, 20);
    let (not, bad, good) = (means["not"], means["bad"], means["good"]);
    let rel = (not - bad).abs() / not.abs().max(bad.abs());
    ensure(rel <= 0.15, format!("beta_not {not:.4} vs beta_bad {bad:.4}: relative gap {rel:.3}"))?;
    ensure(good > not, format!("beta_good {good:.4} <= beta_not {not:.4}"))?;
    Ok(format!("beta_not {not:.3}, beta_bad {bad:.3} (gap {:.1}%), beta_good {good:.3}", 100.0 * rel))
}

fn multiplicity_threshold() -> Check {
    let clf = DnfClassifier::all_of(["very", "good"]).unwrap();
    let mut details = Vec::new();
    for (m, expected_anchor, expected_precision) in
        [(4, vec!["good", "very"], 0.9375), (5, vec!["good"], 0.96875)]
    {
        let text = format!("the food was {}good", "very ".repeat(m));
        let doc = Document::tokenize(&text);
        let good = vec![doc.tokens().iter().position(|t| t == "good").unwrap()];
        let closed = exact_precision_dnf(&clf, &doc, &good).unwrap();
        let brute = exact_precision_bruteforce(&clf, &doc, &good).unwrap();
        ensure((closed - brute).abs() <= 1e-12, format!("m={m}: closed form {closed} vs enumeration {brute}"))?;
        ensure(
            (closed - expected_precision).abs() <= 1e-12,
            format!("m={m}: precision of {{good}} is {closed}"),
        )?;
        let anchor = exhaustive_dnf(&clf, &doc, 0.05);
        ensure(
            sorted(anchor.distinct_words()) == expected_anchor,
            format!("m={m}: anchor {:?}", anchor.words),
        )?;
        details.push(format!("m={m}: {expected_anchor:?} at precision({{good}})={closed}"));
    }
    Ok(details.join("; "))
}

fn disjoint_subsets() -> Check {
    let clf = DnfClassifier::new(vec![vec!["not", "bad"], vec!["very", "good"]]).unwrap();
    let once = Document::tokenize("the food was not bad and very good");
    let many = Document::tokenize("the food was not bad and very very very very very good");
    let a1 = exhaustive_dnf(&clf, &once, 0.05);
    ensure(a1.distinct_words().len() == 2, format!("anchor at m_very=1: {:?}", a1.words))?;
    let a5 = exhaustive_dnf(&clf, &many, 0.05);
    ensure(
        sorted(a1.distinct_words()) != sorted(a5.distinct_words()),
        format!("anchor unchanged: {:?}", a5.words),
    )?;
    let e1 = exact_expected_explanation(&clf, &once, 0.25, 1e-8).unwrap();
    let e5 = exact_expected_explanation(&clf, &many, 0.25, 1e-8).unwrap();
    for w in ["not", "bad"] {
        let (x, y) = (e1.coefficient(w).unwrap(), e5.coefficient(w).unwrap());
        ensure((x - y).abs() <= 1e-10, format!("beta_{w} moved from {x} to {y}"))?;
    }
    Ok(format!("anchors {:?} -> {:?}; beta_not, beta_bad unchanged", a1.words, a5.words))
}

fn logistic_cases() -> Check {
    let text = "i love the pasta here and the staff was good";
    let doc = Document::tokenize(text);
    let mut documents = load_corpus_csv(data_dir().join("synthetic_reviews.csv"))
        .map_err(|e| e.to_string())?
        .documents()
        .to_vec();
    documents.push(doc.clone());
    let vectorizer = Arc::new(TfIdfVectorizer::fit_documents(&documents).unwrap());
    let intercept = 0.1;

    let sparse = LogisticClassifier::new(intercept, [("good", 5.0), ("love", -1.0)], vectorizer.clone()).unwrap();
    ensure(sparse.predict(&doc) == 1, "sparse model predicts 0")?;
    let sparse_hits = beam_hits(&sparse, &doc, &["good"], 100);
    ensure(sparse_hits >= 90, format!("sparse: {{good}} in {sparse_hits}/100 seeds"))?;
    let means = mean_lime(&sparse, &doc, 1000, 100);
    let (good, love) = (means["good"], means["love"]);
    ensure(good > 0.0 && love < 0.0, format!("beta_good {good:.4}, beta_love {love:.4}"))?;
    let other = means
        .iter()
        .filter(|(w, _)| *w != "good" && *w != "love")
        .map(|(_, v)| v.abs())
        .fold(0.0, f64::max);
    ensure(other < love.abs(), format!("max |other| {other:.4} >= |beta_love| {:.4}", love.abs()))?;

    let dense = LogisticClassifier::with_gaussian_background(intercept, [("good", 10.0)], vectorizer, 0).unwrap();
    ensure(dense.predict(&doc) == 1, "dense model predicts 0")?;
    let good_pos = [doc.tokens().iter().position(|t| t == "good").unwrap()];
    let precision = exact_precision_bruteforce(&dense, &doc, &good_pos).unwrap();
    let dense_hits = beam_hits(&dense, &doc, &["good"], 100);
    ensure(dense_hits >= 90, format!("dense: {{good}} in {dense_hits}/100 seeds (precision {precision:.4})"))?;
    Ok(format!(
        "sparse {sparse_hits}/100, beta_good {good:.3} > 0 > beta_love {love:.3}, max |other| {other:.3}; \
         dense {dense_hits}/100, precision({{good}}) {precision:.4}"
    ))
}

fn wordlens_bin(args: &[&str]) -> std::result::Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_wordlens"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("wordlens {args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn train_bundled(dir: &Path) -> std::result::Result<PathBuf, String> {
    let model = dir.join("model.json");
    let corpus = data_dir().join("synthetic_reviews.csv");
    wordlens_bin(&["train", "--corpus", path_str(&corpus), "--output", path_str(&model)])?;
    Ok(model)
}

fn l_index_direction() -> Check {
    let dir = TempDir::new().map_err(|e| e.to_string())?;
    let model = train_bundled(dir.path())?;
    let corpus = data_dir().join("synthetic_reviews.csv");
    let out = wordlens_bin(&["compare", "--model", path_str(&model), "--corpus", path_str(&corpus)])?;
    let report: Value = serde_json::from_slice(&out).map_err(|e| e.to_string())?;
    let lime = report["lime"]["l_index"]["mean"].as_f64().unwrap();
    let anchors = report["anchors"]["l_index"]["mean"].as_f64().unwrap();
    let long: Vec<&Value> = report["records"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|r| r["n_tokens"].as_u64().unwrap() >= 30)
        .collect();
    ensure(!long.is_empty(), "no explained document has 30 or more tokens")?;
    let mean_time = |key: &str| long.iter().map(|r| r[key].as_f64().unwrap()).sum::<f64>() / long.len() as f64;
    let (t_lime, t_anchors) = (mean_time("time_lime_s"), mean_time("time_anchors_s"));
    let summary = format!(
        "l-index LIME {lime:.3}, Anchors {anchors:.3}; on {} documents with b >= 30 mean time LIME {t_lime:.4}s, \
         Anchors {t_anchors:.4}s",
        long.len()
    );
    ensure(lime >= 0.85, format!("{summary}: LIME below 0.85"))?;
    ensure(anchors <= lime, format!("{summary}: Anchors above LIME"))?;
    ensure(t_lime <= t_anchors, format!("{summary}: LIME slower"))?;
    Ok(summary)
}

const WORDS: [&str; 10] = [
    "good", "bad", "not", "very", "nice", "food", "was", "the", "service", "slow",
];

fn random_instance(rng: &mut ChaCha8Rng, max_d: usize) -> (Document, DnfClassifier) {
    let d = rng.random_range(1..=max_d);
    let mut pool = WORDS.to_vec();
    pool.shuffle(rng);
    let present = &pool[..d];
    let mut tokens = Vec::new();
    for w in present {
        for _ in 0..rng.random_range(1..=2) {
            tokens.push(*w);
        }
    }
    tokens.shuffle(rng);
    let clauses: Vec<Vec<&str>> = (0..rng.random_range(1..=3))
        .map(|_| {
            (0..rng.random_range(1..=3))
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

fn normal_equation_residual(samples: &[LimeSample], ridge: f64, intercept: f64, beta: &[f64]) -> f64 {
    let d = beta.len();
    let mut grad = vec![0.0; d + 1];
    for s in samples {
        let x: Vec<f64> = std::iter::once(1.0).chain(s.mask.iter().map(|&m| f64::from(u8::from(m)))).collect();
        let pred = intercept + beta.iter().zip(&x[1..]).map(|(b, x)| b * x).sum::<f64>();
        let r = f64::from(s.label.unwrap()) - pred;
        for (g, xj) in grad.iter_mut().zip(&x) {
            *g += s.weight * r * xj;
        }
    }
    for j in 0..d {
        grad[j + 1] -= ridge * beta[j];
    }
    grad.iter().fold(0.0, |m, g| m.max(g.abs()))
}

fn oracle_equivalences() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2022);
    let instances: Vec<(Document, DnfClassifier, Vec<usize>)> = (0..200)
        .map(|_| {
            let (doc, clf) = random_instance(&mut rng, 8);
            let positions = (0..doc.len()).filter(|_| rng.random_bool(0.3)).collect();
            (doc, clf, positions)
        })
        .collect();

    let mut worst_exact = 0.0f64;
    let mut worst_sampled = 0.0f64;
    let cfg = AnchorConfig {
        batch_size: 100,
        max_batches: 100,
        ..AnchorConfig::default()
    };
    for (i, (doc, clf, positions)) in instances.iter().enumerate() {
        let exact = exact_precision_dnf(clf, doc, positions).unwrap();
        let brute = exact_precision_bruteforce(clf, doc, positions).unwrap();
        worst_exact = worst_exact.max((exact - brute).abs());
        let mut sampler = ChaCha8Rng::seed_from_u64(i as u64);
        let est = empirical_precision(clf, doc, positions, &cfg, &mut sampler).unwrap();
        worst_sampled = worst_sampled.max((est.mean - exact).abs());
    }
    ensure(worst_exact <= 1e-12, format!("(a) closed form vs enumeration off by {worst_exact:e}"))?;
    ensure(worst_sampled <= 0.02, format!("(b) sampled precision off by {worst_sampled:.4}"))?;

    let mut worst_residual = 0.0f64;
    for _ in 0..100 {
        let d = rng.random_range(1..=10);
        let samples: Vec<LimeSample> = (0..rng.random_range(2 * (d + 1)..300))
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
        let ridge = 1e-8;
        let fit = fit_surrogate(&samples, ridge).unwrap();
        worst_residual = worst_residual.max(normal_equation_residual(&samples, ridge, fit.intercept, &fit.coefficients));
    }
    ensure(worst_residual <= 1e-10, format!("(c) normal-equation residual {worst_residual:e}"))?;

    let mut worst_lime = 0.0f64;
    for seed in 0..30 {
        let (doc, clf) = random_instance(&mut rng, 6);
        let cfg = LimeConfig {
            n_samples: 10_000,
            seed,
            ..LimeConfig::default()
        };
        let sampled = explain_lime(&clf, &doc, &cfg).unwrap();
        let exact = exact_expected_explanation(&clf, &doc, cfg.kernel_width, cfg.ridge).unwrap();
        for (a, b) in sampled.coefficients.iter().zip(&exact.coefficients) {
            worst_lime = worst_lime.max((a - b).abs());
        }
    }
    ensure(worst_lime <= 0.05, format!("(d) sampled LIME off by {worst_lime:.4}"))?;

    let mut agree = 0;
    for seed in 0..100u64 {
        let (doc, clf) = random_instance(&mut rng, 8);
        let exhaustive = exhaustive_dnf(&clf, &doc, 0.05);
        let cfg = AnchorConfig {
            seed,
            ..AnchorConfig::default()
        };
        let beam = search_anchor_beam(&clf, &doc, &cfg).unwrap();
        if sorted(beam.distinct_words()) == sorted(exhaustive.distinct_words()) {
            agree += 1;
        }
    }
    ensure(agree >= 90, format!("(e) beam agreed with exhaustive on {agree}/100 seeds"))?;
    Ok(format!(
        "(a) {worst_exact:.1e} (b) {worst_sampled:.4} (c) {worst_residual:.1e} (d) {worst_lime:.4} (e) {agree}/100"
    ))
}

const TIMING_KEYS: [&str; 4] = ["wall_time_s", "time_lime_s", "time_anchors_s", "time_s"];

fn strip_timing(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.retain(|k, _| !TIMING_KEYS.contains(&k.as_str()));
            map.values_mut().for_each(strip_timing);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_timing),
        _ => {}
    }
}

fn json_without_timing(bytes: &[u8]) -> std::result::Result<String, String> {
    let mut v: Value = serde_json::from_slice(bytes).map_err(|e| e.to_string())?;
    strip_timing(&mut v);
    Ok(v.to_string())
}

fn csv_without_timing(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes)
        .lines()
        .map(|l| l.rsplitn(3, ',').last().unwrap_or_default().to_owned())
        .collect::<Vec<_>>()
        .join("\n")
}

fn determinism() -> Check {
    let dir = TempDir::new().map_err(|e| e.to_string())?;
    let dnf = dir.path().join("dnf.json");
    std::fs::write(&dnf, r#"{"type": "dnf", "clauses": [["not", "bad"], ["very", "good"]]}"#)
        .map_err(|e| e.to_string())?;
    let model = train_bundled(dir.path())?;
    let retrained = std::fs::read(&model).map_err(|e| e.to_string())?;
    train_bundled(dir.path())?;
    ensure(std::fs::read(&model).map_err(|e| e.to_string())? == retrained, "train output differs")?;

    let corpus = data_dir().join("synthetic_reviews.csv");
    let text = "not bad at all, the pasta was very very good and the staff was friendly";
    let same = |args: &[&str], strip: &dyn Fn(&[u8]) -> std::result::Result<String, String>| {
        let a = strip(&wordlens_bin(args)?)?;
        let b = strip(&wordlens_bin(args)?)?;
        ensure(a == b, format!("rerun differs: {args:?}"))?;
        Ok::<String, String>(a)
    };
    let json = |b: &[u8]| json_without_timing(b);
    let raw = |b: &[u8]| Ok(String::from_utf8_lossy(b).into_owned());

    for model in [path_str(&dnf), path_str(&model)] {
        same(&["explain", "--method", "lime", "--model", model, "--text", text, "--seed", "11"], &json)?;
        same(&["explain", "--method", "anchors", "--model", model, "--text", text, "--seed", "11"], &json)?;
    }
    let figure = ["figure", "--model", path_str(&dnf), "--text", text, "--runs", "40", "--seed", "3"];
    let serial = same(&figure, &raw)?;
    let parallel = same(&[&figure[..], &["--jobs", "4"]].concat(), &raw)?;
    ensure(serial == parallel, "figure: --jobs 4 differs from serial")?;

    let compare = ["compare", "--model", path_str(&model), "--corpus", path_str(&corpus), "--seed", "5"];
    let serial = same(&compare, &json)?;
    let parallel = same(&[&compare[..], &["--jobs", "4"]].concat(), &json)?;
    ensure(serial == parallel, "compare: --jobs 4 differs from serial")?;
    let csv = |b: &[u8]| Ok(csv_without_timing(b));
    let serial = same(&[&compare[..], &["--format", "csv"]].concat(), &csv)?;
    let parallel = same(&[&compare[..], &["--format", "csv", "--jobs", "4"]].concat(), &csv)?;
    ensure(serial == parallel, "compare csv: --jobs 4 differs from serial")?;
    Ok("explain, figure, compare and train reruns identical; --jobs 4 equals serial".into())
}

fn main() {
    let criteria: [(&str, u64, fn() -> Check); 8] = [
        ("1 single-word rule", 30, single_word_rule),
        ("2 shortest-anchor preference", 60, shortest_anchor),
        ("3 multiplicity threshold", 5, multiplicity_threshold),
        ("4 disjoint-subsets dependence", 10, disjoint_subsets),
        ("5 logistic cases", 120, logistic_cases),
        ("6 l-index direction", 600, l_index_direction),
        ("7 oracle equivalences", 600, oracle_equivalences),
        ("8 determinism", 600, determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, budget, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let over = elapsed > Duration::from_secs(budget);
        let (status, detail) = match (&result, over) {
            (Ok(d), false) => ("PASS", d.clone()),
            (Ok(d), true) => ("FAIL", format!("over the {budget}s budget; {d}")),
            (Err(e), _) => ("FAIL", e.clone()),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!("criterion {name}: {status} ({:.1}s) {detail}", elapsed.as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
