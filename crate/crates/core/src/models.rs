//! Transparent text classifiers: disjunctions of word-presence conjunctions
//! and thresholded logistic models over TF-IDF features.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document, TfIdfVectorizer};
use crate::error::{Error, Result};

/// A binary text classifier. `1` is the positive class.
pub trait Classifier: Send + Sync {
    fn predict(&self, doc: &Document) -> u8;
}

impl<F> Classifier for F
where
    F: Fn(&Document) -> u8 + Send + Sync,
{
    fn predict(&self, doc: &Document) -> u8 {
        self(doc)
    }
}

/// `f(z) = 1` iff every word of at least one clause occurs in `z`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "DnfFile", into = "DnfFile")]
pub struct DnfClassifier {
    clauses: Vec<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
struct DnfFile {
    clauses: Vec<Vec<String>>,
}

impl TryFrom<DnfFile> for DnfClassifier {
    type Error = Error;

    fn try_from(file: DnfFile) -> Result<Self> {
        DnfClassifier::new(file.clauses)
    }
}

impl From<DnfClassifier> for DnfFile {
    fn from(c: DnfClassifier) -> Self {
        DnfFile { clauses: c.clauses }
    }
}

impl DnfClassifier {
    pub fn new<C, W>(clauses: C) -> Result<Self>
    where
        C: IntoIterator,
        C::Item: IntoIterator<Item = W>,
        W: Into<String>,
    {
        let mut out = Vec::new();
        for clause in clauses {
            let mut words: Vec<String> = Vec::new();
            for w in clause {
                let w: String = w.into();
                let toks = Document::tokenize(&w);
                if toks.len() != 1 || toks.tokens()[0] != w {
                    return Err(Error::InvalidModel(format!(
                        "clause word `{w}` is not a single normalized token"
                    )));
                }
                if !words.contains(&w) {
                    words.push(w);
                }
            }
            if words.is_empty() {
                return Err(Error::InvalidModel("empty clause".into()));
            }
            out.push(words);
        }
        if out.is_empty() {
            return Err(Error::InvalidModel("a DNF needs at least one clause".into()));
        }
        Ok(DnfClassifier { clauses: out })
    }

    /// `1{word ∈ z}`.
    pub fn word(word: &str) -> Result<Self> {
        Self::new([[word]])
    }

    /// `Π_j 1{w_j ∈ z}`.
    pub fn all_of<'a>(words: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        Self::new([words.into_iter().collect::<Vec<_>>()])
    }

    pub fn clauses(&self) -> &[Vec<String>] {
        &self.clauses
    }

    /// Distinct words mentioned by any clause.
    pub fn words(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.clauses
            .iter()
            .flatten()
            .map(String::as_str)
            .filter(|w| seen.insert(*w))
            .collect()
    }

    pub fn predict_present(&self, present: impl Fn(&str) -> bool) -> u8 {
        u8::from(
            self.clauses
                .iter()
                .any(|clause| clause.iter().all(|w| present(w))),
        )
    }
}

impl Classifier for DnfClassifier {
    fn predict(&self, doc: &Document) -> u8 {
        let present: HashSet<&str> = doc.tokens().iter().map(String::as_str).collect();
        self.predict_present(|w| present.contains(w))
    }
}

/// `f(z) = 1{σ(λ₀ + λᵀφ(z)) > 1/2}`, evaluated as `λ₀ + λᵀφ(z) > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticClassifier {
    intercept: f64,
    // aligned with the vectorizer vocabulary
    coefficients: Vec<f64>,
    vectorizer: Arc<TfIdfVectorizer>,
}

impl LogisticClassifier {
    /// Coefficients not listed are zero. Every listed word must be in the
    /// vectorizer vocabulary.
    pub fn new<'a, I>(intercept: f64, coefficients: I, vectorizer: Arc<TfIdfVectorizer>) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, f64)>,
    {
        let mut dense = vec![0.0; vectorizer.dim()];
        for (word, value) in coefficients {
            let j = vectorizer
                .index_of(word)
                .ok_or_else(|| Error::UnknownWord(word.to_owned()))?;
            if !value.is_finite() {
                return Err(Error::InvalidModel(format!("coefficient for `{word}` is {value}")));
            }
            dense[j] = value;
        }
        if !intercept.is_finite() {
            return Err(Error::InvalidModel(format!("intercept is {intercept}")));
        }
        Ok(LogisticClassifier {
            intercept,
            coefficients: dense,
            vectorizer,
        })
    }

    /// Listed coefficients are fixed; every other vocabulary word gets an
    /// independent standard normal coefficient drawn from `seed`.
    pub fn with_gaussian_background<'a, I>(
        intercept: f64,
        fixed: I,
        vectorizer: Arc<TfIdfVectorizer>,
        seed: u64,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, f64)>,
    {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let words = vectorizer.vocabulary().words().to_vec();
        let random: Vec<f64> = words.iter().map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut clf = Self::new(
            intercept,
            words.iter().map(String::as_str).zip(random),
            vectorizer,
        )?;
        for (word, value) in fixed {
            let j = clf
                .vectorizer
                .index_of(word)
                .ok_or_else(|| Error::UnknownWord(word.to_owned()))?;
            clf.coefficients[j] = value;
        }
        Ok(clf)
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn vectorizer(&self) -> &Arc<TfIdfVectorizer> {
        &self.vectorizer
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// λ for `word`; zero for out-of-vocabulary words.
    pub fn coefficient(&self, word: &str) -> f64 {
        self.vectorizer
            .index_of(word)
            .map_or(0.0, |j| self.coefficients[j])
    }

    /// `λ₀ + λᵀφ(doc)`.
    pub fn margin(&self, doc: &Document) -> f64 {
        self.intercept
            + self
                .vectorizer
                .vectorize_sparse(doc)
                .into_iter()
                .map(|(j, v)| self.coefficients[j] * v)
                .sum::<f64>()
    }

    pub fn probability(&self, doc: &Document) -> f64 {
        1.0 / (1.0 + (-self.margin(doc)).exp())
    }

    /// `λ_j φ(doc)_j` for a word of the document.
    pub fn word_contribution(&self, doc: &Document, word: &str) -> Result<f64> {
        if !doc.contains(word) {
            return Err(Error::WordNotInDocument(word.to_owned()));
        }
        let Some(j) = self.vectorizer.index_of(word) else {
            return Ok(0.0);
        };
        let phi = self
            .vectorizer
            .vectorize_sparse(doc)
            .into_iter()
            .find_map(|(i, v)| (i == j).then_some(v))
            .unwrap_or(0.0);
        Ok(self.coefficients[j] * phi)
    }

    /// Contribution of every distinct word of `doc`, in first-occurrence
    /// order.
    pub fn contributions(&self, doc: &Document) -> Vec<(String, f64)> {
        let phi: BTreeMap<usize, f64> = self.vectorizer.vectorize_sparse(doc).into_iter().collect();
        doc.local_dictionary()
            .words()
            .map(|w| {
                let c = self
                    .vectorizer
                    .index_of(w)
                    .map_or(0.0, |j| self.coefficients[j] * phi.get(&j).copied().unwrap_or(0.0));
                (w.to_owned(), c)
            })
            .collect()
    }
}

impl Classifier for LogisticClassifier {
    fn predict(&self, doc: &Document) -> u8 {
        u8::from(self.margin(doc) > 0.0)
    }
}

/// Full-batch gradient descent settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2_penalty: f64,
    /// Weights start at zero and the descent is full-batch, so the seed has
    /// no effect on the result; it is carried for provenance.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1.0,
            epochs: 5000,
            l2_penalty: 1e-5,
            seed: 0,
        }
    }
}

/// Mean logistic loss plus `(l2 / 2)‖λ‖²` (intercept unpenalized).
fn objective(
    features: &[Vec<(usize, f64)>],
    targets: &[f64],
    intercept: f64,
    weights: &[f64],
    l2: f64,
) -> f64 {
    let n = features.len() as f64;
    let data: f64 = features
        .iter()
        .zip(targets)
        .map(|(x, &y)| {
            let m = intercept + x.iter().map(|&(j, v)| weights[j] * v).sum::<f64>();
            // log(1 + e^m) - y m, computed stably
            let softplus = if m > 0.0 {
                m + (-m).exp().ln_1p()
            } else {
                m.exp().ln_1p()
            };
            softplus - y * m
        })
        .sum::<f64>()
        / n;
    data + 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>()
}

/// Trains a logistic model on TF-IDF features fitted to `corpus`.
pub fn train_logistic(corpus: &Corpus, cfg: &TrainConfig) -> Result<LogisticClassifier> {
    train_logistic_traced(corpus, cfg).map(|(clf, _)| clf)
}

/// Like [`train_logistic`], also returning the objective before each epoch
/// and after the last one (`epochs + 1` values).
pub fn train_logistic_traced(
    corpus: &Corpus,
    cfg: &TrainConfig,
) -> Result<(LogisticClassifier, Vec<f64>)> {
    if !(cfg.learning_rate > 0.0 && cfg.learning_rate.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "learning_rate must be positive, got {}",
            cfg.learning_rate
        )));
    }
    if !(cfg.l2_penalty >= 0.0 && cfg.l2_penalty.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "l2_penalty must be nonnegative, got {}",
            cfg.l2_penalty
        )));
    }
    let first = *corpus.labels().first().ok_or(Error::EmptyCorpus)?;
    if corpus.labels().iter().all(|&l| l == first) {
        return Err(Error::SingleClass(first));
    }

    let vectorizer = Arc::new(TfIdfVectorizer::fit(corpus)?);
    let features: Vec<Vec<(usize, f64)>> = corpus
        .documents()
        .iter()
        .map(|d| vectorizer.vectorize_sparse(d))
        .collect();
    let targets: Vec<f64> = corpus.labels().iter().map(|&l| f64::from(l)).collect();
    let n = features.len() as f64;

    let mut intercept = 0.0;
    let mut weights = vec![0.0; vectorizer.dim()];
    let mut losses = Vec::with_capacity(cfg.epochs + 1);
    let mut grad = vec![0.0; weights.len()];
    for _ in 0..cfg.epochs {
        losses.push(objective(&features, &targets, intercept, &weights, cfg.l2_penalty));
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_intercept = 0.0;
        for (x, &y) in features.iter().zip(&targets) {
            let m = intercept + x.iter().map(|&(j, v)| weights[j] * v).sum::<f64>();
            let residual = 1.0 / (1.0 + (-m).exp()) - y;
            grad_intercept += residual;
            for &(j, v) in x {
                grad[j] += residual * v;
            }
        }
        intercept -= cfg.learning_rate * grad_intercept / n;
        for (w, g) in weights.iter_mut().zip(&grad) {
            *w -= cfg.learning_rate * (g / n + cfg.l2_penalty * *w);
        }
    }
    losses.push(objective(&features, &targets, intercept, &weights, cfg.l2_penalty));

    Ok((
        LogisticClassifier {
            intercept,
            coefficients: weights,
            vectorizer,
        },
        losses,
    ))
}

/// Fraction of `corpus` documents whose prediction matches the label.
pub fn accuracy(clf: &impl Classifier, corpus: &Corpus) -> f64 {
    if corpus.is_empty() {
        return 0.0;
    }
    let hits = corpus.iter().filter(|(d, l)| clf.predict(d) == *l).count();
    hits as f64 / corpus.len() as f64
}

/// A classifier as stored in a model file.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Dnf(DnfClassifier),
    Logistic(LogisticClassifier),
}

impl Classifier for Model {
    fn predict(&self, doc: &Document) -> u8 {
        match self {
            Model::Dnf(c) => c.predict(doc),
            Model::Logistic(c) => c.predict(doc),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum VectorizerRef {
    Inline(TfIdfVectorizer),
    Path(String),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum ModelFile {
    Dnf {
        clauses: Vec<Vec<String>>,
    },
    Logistic {
        intercept: f64,
        coefficients: BTreeMap<String, f64>,
        vectorizer: VectorizerRef,
    },
}

impl Model {
    /// Parses a model file. A logistic model's `vectorizer` may be inline or
    /// a path, resolved against `base_dir` when relative.
    pub fn from_json(json: &str, base_dir: Option<&Path>) -> Result<Self> {
        match serde_json::from_str::<ModelFile>(json)? {
            ModelFile::Dnf { clauses } => Ok(Model::Dnf(DnfClassifier::new(clauses)?)),
            ModelFile::Logistic {
                intercept,
                coefficients,
                vectorizer,
            } => {
                let vectorizer = match vectorizer {
                    VectorizerRef::Inline(v) => v,
                    VectorizerRef::Path(p) => {
                        let p = Path::new(&p);
                        let full = match base_dir {
                            Some(dir) if p.is_relative() => dir.join(p),
                            _ => p.to_owned(),
                        };
                        let text = std::fs::read_to_string(&full).map_err(|e| Error::io(&full, e))?;
                        serde_json::from_str(&text)?
                    }
                };
                let clf = LogisticClassifier::new(
                    intercept,
                    coefficients.iter().map(|(w, v)| (w.as_str(), *v)),
                    Arc::new(vectorizer),
                )?;
                Ok(Model::Logistic(clf))
            }
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path.parent())
    }

    /// Serializes with the vectorizer inline. Logistic coefficients are
    /// written for every vocabulary word, sorted by word.
    pub fn to_json(&self) -> Result<String> {
        let file = match self {
            Model::Dnf(c) => ModelFile::Dnf {
                clauses: c.clauses.clone(),
            },
            Model::Logistic(c) => ModelFile::Logistic {
                intercept: c.intercept,
                coefficients: c
                    .vectorizer
                    .vocabulary()
                    .words()
                    .iter()
                    .cloned()
                    .zip(c.coefficients.iter().copied())
                    .collect(),
                vectorizer: VectorizerRef::Inline((*c.vectorizer).clone()),
            },
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn as_dnf(&self) -> Option<&DnfClassifier> {
        match self {
            Model::Dnf(c) => Some(c),
            Model::Logistic(_) => None,
        }
    }

    pub fn as_logistic(&self) -> Option<&LogisticClassifier> {
        match self {
            Model::Logistic(c) => Some(c),
            Model::Dnf(_) => None,
        }
    }
}

impl From<DnfClassifier> for Model {
    fn from(c: DnfClassifier) -> Self {
        Model::Dnf(c)
    }
}

impl From<LogisticClassifier> for Model {
    fn from(c: LogisticClassifier) -> Self {
        Model::Logistic(c)
    }
}
