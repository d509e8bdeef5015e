//! Repeated-seed experiments: single explanations, per-word figure data
//! aggregated over runs, and corpus-level ℓ-index comparisons.
//!
//! Every result is a pure function of its inputs and a master seed. Work is
//! spread over a rayon pool, but seeds are derived from run or document
//! indices, so the degree of parallelism never changes the output.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anchors::{
    exact_precision_bruteforce, exact_precision_dnf, search_anchor_beam, search_anchor_exhaustive,
    Anchor, AnchorConfig,
};
use crate::corpus::{Corpus, Document};
use crate::error::{Error, Result};
use crate::lime::{explain_lime, LimeConfig, LimeExplanation};
use crate::metrics::{
    ground_truth_top_n, jaccard, lime_top_n, DocumentRecord, LIndexReport, MeanStd, Ranking,
};
use crate::models::{Classifier, LogisticClassifier, Model};

/// Seed for item `index` of a run seeded with `master` (SplitMix64 finalizer).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// How anchor precision is obtained during search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrecisionMode {
    /// Exhaustive search with exact precision: closed form for DNF models,
    /// enumeration of replacement patterns otherwise.
    Exact,
    /// Beam search with sampled precision.
    Sampled,
}

impl PrecisionMode {
    /// Exact for DNF models, sampled otherwise.
    pub fn default_for(model: &Model) -> Self {
        match model {
            Model::Dnf(_) => PrecisionMode::Exact,
            Model::Logistic(_) => PrecisionMode::Sampled,
        }
    }
}

/// Runs one Anchors search.
pub fn run_anchors(model: &Model, doc: &Document, cfg: &AnchorConfig, mode: PrecisionMode) -> Result<Anchor> {
    match (mode, model) {
        (PrecisionMode::Sampled, _) => search_anchor_beam(model, doc, cfg),
        (PrecisionMode::Exact, Model::Dnf(clf)) => {
            cfg.validate()?;
            search_anchor_exhaustive(doc, cfg.epsilon, cfg.occurrences, |pos| {
                exact_precision_dnf(clf, doc, pos)
            })
        }
        (PrecisionMode::Exact, Model::Logistic(clf)) => {
            cfg.validate()?;
            search_anchor_exhaustive(doc, cfg.epsilon, cfg.occurrences, |pos| {
                exact_precision_bruteforce(clf, doc, pos)
            })
        }
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))
}

/// LIME output as written by the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimeRecord {
    pub method: String,
    pub doc_id: usize,
    pub intercept: f64,
    pub coefficients: std::collections::BTreeMap<String, f64>,
    pub n: usize,
    pub seed: u64,
    pub wall_time_s: f64,
}

impl LimeRecord {
    pub fn new(doc_id: usize, exp: &LimeExplanation, wall_time_s: f64) -> Self {
        LimeRecord {
            method: "lime".into(),
            doc_id,
            intercept: exp.intercept,
            coefficients: exp.iter().map(|(w, c)| (w.to_owned(), c)).collect(),
            n: exp.n_samples,
            seed: exp.seed,
            wall_time_s,
        }
    }
}

/// Anchors output as written by the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorRecord {
    pub method: String,
    pub doc_id: usize,
    pub anchor_words: Vec<String>,
    pub positions: Vec<usize>,
    pub precision: f64,
    pub converged: bool,
    pub n_model_calls: usize,
    pub seed: u64,
    pub wall_time_s: f64,
}

impl AnchorRecord {
    pub fn new(doc_id: usize, anchor: &Anchor, seed: u64, wall_time_s: f64) -> Self {
        AnchorRecord {
            method: "anchors".into(),
            doc_id,
            anchor_words: anchor.words.clone(),
            positions: anchor.positions.clone(),
            precision: anchor.precision,
            converged: anchor.converged,
            n_model_calls: anchor.model_calls,
            seed,
            wall_time_s,
        }
    }
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let start = Instant::now();
    let out = f()?;
    Ok((out, start.elapsed().as_secs_f64()))
}

pub fn explain_lime_record(model: &Model, doc: &Document, cfg: &LimeConfig, doc_id: usize) -> Result<LimeRecord> {
    let (exp, t) = timed(|| explain_lime(model, doc, cfg))?;
    Ok(LimeRecord::new(doc_id, &exp, t))
}

pub fn explain_anchors_record(
    model: &Model,
    doc: &Document,
    cfg: &AnchorConfig,
    mode: PrecisionMode,
    doc_id: usize,
) -> Result<AnchorRecord> {
    let (anchor, t) = timed(|| run_anchors(model, doc, cfg, mode))?;
    Ok(AnchorRecord::new(doc_id, &anchor, cfg.seed, t))
}

/// Aggregates for one word of the explained document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureRow {
    pub word: String,
    pub multiplicity: usize,
    pub lime_mean: f64,
    pub lime_std: f64,
    /// Runs whose anchor contains the word.
    pub anchor_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureData {
    pub runs: usize,
    pub master_seed: u64,
    pub precision_mode: PrecisionMode,
    pub rows: Vec<FigureRow>,
}

impl FigureData {
    pub fn row(&self, word: &str) -> Option<&FigureRow> {
        self.rows.iter().find(|r| r.word == word)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["word", "multiplicity", "lime_mean", "lime_std", "anchor_count", "runs"])?;
        for r in &self.rows {
            w.write_record([
                r.word.clone(),
                r.multiplicity.to_string(),
                r.lime_mean.to_string(),
                r.lime_std.to_string(),
                r.anchor_count.to_string(),
                self.runs.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv output>", e))?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FigureConfig {
    pub runs: usize,
    pub master_seed: u64,
    pub jobs: usize,
    pub precision_mode: PrecisionMode,
}

/// Runs both explainers `runs` times with seeds `master_seed + i` and
/// aggregates per word: mean and std of the LIME coefficient, and how many
/// anchors contain the word.
pub fn figure(
    model: &Model,
    doc: &Document,
    lime: &LimeConfig,
    anchors: &AnchorConfig,
    cfg: &FigureConfig,
) -> Result<FigureData> {
    if cfg.runs == 0 {
        return Err(Error::InvalidConfig("runs must be at least 1".into()));
    }
    let dict = doc.local_dictionary();
    let runs: Vec<(LimeExplanation, Anchor)> = pool(cfg.jobs)?.install(|| {
        (0..cfg.runs)
            .into_par_iter()
            .map(|i| {
                let seed = cfg.master_seed.wrapping_add(i as u64);
                let exp = explain_lime(model, doc, &LimeConfig { seed, ..*lime })?;
                let anchor = run_anchors(model, doc, &AnchorConfig { seed, ..*anchors }, cfg.precision_mode)?;
                Ok((exp, anchor))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let rows = dict
        .entries()
        .iter()
        .enumerate()
        .map(|(j, entry)| {
            let values: Vec<f64> = runs.iter().map(|(e, _)| e.coefficients[j]).collect();
            let stats = MeanStd::of(&values)?;
            Ok(FigureRow {
                word: entry.word.clone(),
                multiplicity: entry.multiplicity(),
                lime_mean: stats.mean,
                lime_std: stats.std,
                anchor_count: runs.iter().filter(|(_, a)| a.words.contains(&entry.word)).count(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FigureData {
        runs: cfg.runs,
        master_seed: cfg.master_seed,
        precision_mode: cfg.precision_mode,
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareConfig {
    pub master_seed: u64,
    pub jobs: usize,
    pub ranking: Ranking,
    pub precision_mode: PrecisionMode,
}

/// Compares LIME and Anchors against the logistic ground truth on every
/// positively predicted document of `corpus`. For each document the anchor
/// is found first and its number of distinct words sets `N`.
pub fn compare(
    clf: &LogisticClassifier,
    corpus: &Corpus,
    lime: &LimeConfig,
    anchors: &AnchorConfig,
    cfg: &CompareConfig,
) -> Result<LIndexReport> {
    let model = Model::Logistic(clf.clone());
    let positive: Vec<(usize, &Document)> = corpus
        .documents()
        .iter()
        .enumerate()
        .filter(|(_, d)| clf.predict(d) == 1)
        .collect();
    let skipped = corpus.len() - positive.len();
    if positive.is_empty() {
        return Err(Error::NoPositivePredictions);
    }

    let records: Vec<DocumentRecord> = pool(cfg.jobs)?.install(|| {
        positive
            .par_iter()
            .map(|&(doc_id, doc)| {
                let seed = derive_seed(cfg.master_seed, doc_id as u64);
                let anchor_cfg = AnchorConfig { seed, ..*anchors };
                let lime_cfg = LimeConfig {
                    seed: derive_seed(seed, u64::MAX),
                    ..*lime
                };
                let (anchor, time_anchors_s) =
                    timed(|| run_anchors(&model, doc, &anchor_cfg, cfg.precision_mode))?;
                let anchor_words = anchor.distinct_words();
                let n = anchor_words.len();
                let (exp, time_lime_s) = timed(|| explain_lime(clf, doc, &lime_cfg))?;
                let lime_topn = lime_top_n(&exp, n, cfg.ranking)?;
                let gt_topn = ground_truth_top_n(clf, doc, n, cfg.ranking)?;
                Ok(DocumentRecord {
                    doc_id,
                    n,
                    jaccard_anchors: jaccard(&anchor_words, &gt_topn),
                    jaccard_lime: jaccard(&lime_topn, &gt_topn),
                    anchor_precision: anchor.precision,
                    anchor_converged: anchor.converged,
                    empty_anchor: n == 0,
                    n_tokens: doc.len(),
                    anchor_words,
                    lime_topn,
                    gt_topn,
                    time_lime_s,
                    time_anchors_s,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    LIndexReport::from_records(records, skipped, cfg.ranking)
}
