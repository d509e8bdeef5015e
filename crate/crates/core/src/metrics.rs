//! Ground-truth word rankings for logistic models, Jaccard similarity and the
//! ℓ-index: the corpus mean of `J(E_N(z), Λ_N(z))` where `Λ_N(z)` holds the
//! `N` words with the largest contribution `λ_j φ(z)_j` and `E_N(z)` the `N`
//! words an explainer ranks highest.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::lime::LimeExplanation;
use crate::models::LogisticClassifier;

/// How word scores are ordered when picking the top `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ranking {
    /// Largest signed score first: the words pushing hardest toward class 1.
    #[default]
    Signed,
    Absolute,
}

/// Words with scores, best first; ties in alphabetical order.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedWords(Vec<(String, f64)>);

impl RankedWords {
    pub fn new(scores: impl IntoIterator<Item = (String, f64)>, ranking: Ranking) -> Self {
        let key = |s: f64| match ranking {
            Ranking::Signed => s,
            Ranking::Absolute => s.abs(),
        };
        let mut v: Vec<(String, f64)> = scores.into_iter().collect();
        v.sort_by(|a, b| key(b.1).total_cmp(&key(a.1)).then_with(|| a.0.cmp(&b.0)));
        v.dedup_by(|a, b| a.0 == b.0);
        RankedWords(v)
    }

    pub fn as_slice(&self) -> &[(String, f64)] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn top(&self, n: usize) -> Result<Vec<String>> {
        if n > self.0.len() {
            return Err(Error::TopNTooLarge {
                requested: n,
                available: self.0.len(),
            });
        }
        Ok(self.0[..n].iter().map(|(w, _)| w.clone()).collect())
    }
}

/// `|A ∩ B| / |A ∪ B|`, with two empty sets scoring 1.
pub fn jaccard<A, B>(a: &[A], b: &[B]) -> f64
where
    A: AsRef<str>,
    B: AsRef<str>,
{
    let a: BTreeSet<&str> = a.iter().map(AsRef::as_ref).collect();
    let b: BTreeSet<&str> = b.iter().map(AsRef::as_ref).collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

/// `Λ_N(doc)`.
pub fn ground_truth_top_n(
    clf: &LogisticClassifier,
    doc: &Document,
    n: usize,
    ranking: Ranking,
) -> Result<Vec<String>> {
    RankedWords::new(clf.contributions(doc), ranking).top(n)
}

/// `E_N(doc)` for a LIME explanation.
pub fn lime_top_n(exp: &LimeExplanation, n: usize, ranking: Ranking) -> Result<Vec<String>> {
    RankedWords::new(exp.iter().map(|(w, c)| (w.to_owned(), c)), ranking).top(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Ok(MeanStd {
            mean,
            std: var.sqrt(),
        })
    }
}

/// ℓ-index over `(E_N(z), Λ_N(z))` pairs.
pub fn l_index<S: AsRef<str>>(pairs: &[(Vec<S>, Vec<S>)]) -> Result<MeanStd> {
    let values: Vec<f64> = pairs.iter().map(|(e, g)| jaccard(e, g)).collect();
    MeanStd::of(&values)
}

/// One explained document in a comparison run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub doc_id: usize,
    /// `|A(z)|`, the number of distinct anchor words.
    pub n: usize,
    pub anchor_words: Vec<String>,
    pub lime_topn: Vec<String>,
    pub gt_topn: Vec<String>,
    pub jaccard_anchors: f64,
    pub jaccard_lime: f64,
    pub anchor_precision: f64,
    pub anchor_converged: bool,
    /// Both top-N sets are empty, so both Jaccard values are 1 by convention.
    pub empty_anchor: bool,
    pub n_tokens: usize,
    pub time_lime_s: f64,
    pub time_anchors_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainerSummary {
    pub l_index: MeanStd,
    pub time_s: MeanStd,
}

/// Per-document records plus aggregate ℓ-index and timing per explainer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LIndexReport {
    pub ranking: Ranking,
    /// Always `"population"`.
    pub std_kind: String,
    pub n_documents: usize,
    pub n_skipped_negative: usize,
    pub n_empty_anchors: usize,
    pub n_unconverged: usize,
    pub lime: ExplainerSummary,
    pub anchors: ExplainerSummary,
    pub records: Vec<DocumentRecord>,
}

pub const REPORT_CSV_HEADER: [&str; 9] = [
    "doc_id",
    "N",
    "anchor_words",
    "lime_topn",
    "gt_topn",
    "jaccard_anchors",
    "jaccard_lime",
    "time_lime_s",
    "time_anchors_s",
];

impl LIndexReport {
    /// Aggregates `records` (sorted by `doc_id`).
    pub fn from_records(
        mut records: Vec<DocumentRecord>,
        n_skipped_negative: usize,
        ranking: Ranking,
    ) -> Result<Self> {
        records.sort_by_key(|r| r.doc_id);
        let col = |f: fn(&DocumentRecord) -> f64| records.iter().map(f).collect::<Vec<_>>();
        let lime = ExplainerSummary {
            l_index: MeanStd::of(&col(|r| r.jaccard_lime))?,
            time_s: MeanStd::of(&col(|r| r.time_lime_s))?,
        };
        let anchors = ExplainerSummary {
            l_index: MeanStd::of(&col(|r| r.jaccard_anchors))?,
            time_s: MeanStd::of(&col(|r| r.time_anchors_s))?,
        };
        Ok(LIndexReport {
            ranking,
            std_kind: "population".into(),
            n_documents: records.len(),
            n_skipped_negative,
            n_empty_anchors: records.iter().filter(|r| r.empty_anchor).count(),
            n_unconverged: records.iter().filter(|r| !r.anchor_converged).count(),
            lime,
            anchors,
            records,
        })
    }

    /// One CSV row per record; word lists are space-separated.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(REPORT_CSV_HEADER)?;
        for r in &self.records {
            w.write_record([
                r.doc_id.to_string(),
                r.n.to_string(),
                r.anchor_words.join(" "),
                r.lime_topn.join(" "),
                r.gt_topn.join(" "),
                r.jaccard_anchors.to_string(),
                r.jaccard_lime.to_string(),
                r.time_lime_s.to_string(),
                r.time_anchors_s.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv output>", e))?;
        Ok(())
    }
}
