//! Python bindings: models, both explainers, their exact oracles and the
//! evaluation metrics.

use std::collections::BTreeMap;
use std::sync::Arc;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use wordlens_core::anchors::{self, AnchorConfig, Occurrences};
use wordlens_core::bench::{run_anchors, PrecisionMode};
use wordlens_core::lime::{self, LimeConfig, LimeExplanation};
use wordlens_core::metrics;
use wordlens_core::models::{self, Classifier, TrainConfig};
use wordlens_core::{Corpus, Document, DnfClassifier, Error, LogisticClassifier, TfIdfVectorizer};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// Lowercased alphanumeric tokens of `text`.
#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    Document::tokenize(text).tokens().to_vec()
}

/// TF-IDF vectorizer fitted to a list of texts.
#[pyclass(frozen, name = "Vectorizer")]
struct PyVectorizer(Arc<TfIdfVectorizer>);

#[pymethods]
impl PyVectorizer {
    #[new]
    fn new(texts: Vec<String>) -> PyResult<Self> {
        let docs: Vec<Document> = texts.iter().map(|t| Document::tokenize(t)).collect();
        TfIdfVectorizer::fit_documents(&docs)
            .map(|v| PyVectorizer(Arc::new(v)))
            .map_err(py_err)
    }

    #[getter]
    fn vocabulary(&self) -> Vec<String> {
        self.0.vocabulary().words().to_vec()
    }

    fn idf(&self, word: &str) -> Option<f64> {
        self.0.idf_of(word)
    }

    /// Nonzero TF-IDF entries of `text`, keyed by word.
    fn transform(&self, text: &str) -> BTreeMap<String, f64> {
        let words = self.0.vocabulary().words();
        self.0
            .vectorize_sparse(&Document::tokenize(text))
            .into_iter()
            .map(|(j, v)| (words[j].clone(), v))
            .collect()
    }
}

/// A DNF rule or a thresholded logistic model.
#[pyclass(frozen, name = "Model")]
struct PyModel(models::Model);

#[pymethods]
impl PyModel {
    /// Disjunction of conjunctions of word presences.
    #[staticmethod]
    fn dnf(clauses: Vec<Vec<String>>) -> PyResult<Self> {
        DnfClassifier::new(clauses)
            .map(|c| PyModel(c.into()))
            .map_err(py_err)
    }

    /// Logistic model; words missing from `coefficients` get 0.
    #[staticmethod]
    fn logistic(intercept: f64, coefficients: BTreeMap<String, f64>, vectorizer: &PyVectorizer) -> PyResult<Self> {
        LogisticClassifier::new(
            intercept,
            coefficients.iter().map(|(w, c)| (w.as_str(), *c)),
            vectorizer.0.clone(),
        )
        .map(|c| PyModel(c.into()))
        .map_err(py_err)
    }

    /// Logistic model with the given coefficients fixed and standard normal
    /// coefficients for every other vocabulary word.
    #[staticmethod]
    #[pyo3(signature = (intercept, fixed, vectorizer, seed=0))]
    fn gaussian_logistic(
        intercept: f64,
        fixed: BTreeMap<String, f64>,
        vectorizer: &PyVectorizer,
        seed: u64,
    ) -> PyResult<Self> {
        LogisticClassifier::with_gaussian_background(
            intercept,
            fixed.iter().map(|(w, c)| (w.as_str(), *c)),
            vectorizer.0.clone(),
            seed,
        )
        .map(|c| PyModel(c.into()))
        .map_err(py_err)
    }

    /// Full-batch gradient descent on a labeled corpus.
    #[staticmethod]
    #[pyo3(signature = (texts, labels, epochs=None, learning_rate=None, l2=None))]
    fn train(
        texts: Vec<String>,
        labels: Vec<u8>,
        epochs: Option<usize>,
        learning_rate: Option<f64>,
        l2: Option<f64>,
    ) -> PyResult<Self> {
        let corpus = Corpus::from_texts(texts.iter().map(String::as_str).zip(labels)).map_err(py_err)?;
        let d = TrainConfig::default();
        let cfg = TrainConfig {
            epochs: epochs.unwrap_or(d.epochs),
            learning_rate: learning_rate.unwrap_or(d.learning_rate),
            l2_penalty: l2.unwrap_or(d.l2_penalty),
            ..d
        };
        models::train_logistic(&corpus, &cfg)
            .map(|c| PyModel(c.into()))
            .map_err(py_err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        models::Model::load(path).map(PyModel).map_err(py_err)
    }

    #[staticmethod]
    fn from_json(json: &str) -> PyResult<Self> {
        models::Model::from_json(json, None).map(PyModel).map_err(py_err)
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.to_json().map_err(py_err)
    }

    #[getter]
    fn kind(&self) -> &'static str {
        match self.0 {
            models::Model::Dnf(_) => "dnf",
            models::Model::Logistic(_) => "logistic",
        }
    }

    fn predict(&self, text: &str) -> u8 {
        self.0.predict(&Document::tokenize(text))
    }

    /// `λ_j φ(z)_j` per distinct word of `text`; logistic models only.
    fn contributions(&self, text: &str) -> PyResult<Vec<(String, f64)>> {
        Ok(logistic(&self.0)?.contributions(&Document::tokenize(text)))
    }

    fn __repr__(&self) -> String {
        match &self.0 {
            models::Model::Dnf(c) => format!("Model.dnf({:?})", c.clauses()),
            models::Model::Logistic(c) => {
                format!("<logistic Model, {} words, intercept {}>", c.coefficients().len(), c.intercept())
            }
        }
    }
}

fn logistic(model: &models::Model) -> PyResult<&LogisticClassifier> {
    model
        .as_logistic()
        .ok_or_else(|| PyValueError::new_err("this operation needs a logistic model"))
}

fn document(text: &str) -> PyResult<Document> {
    let doc = Document::tokenize(text);
    if doc.is_empty() {
        return Err(py_err(Error::EmptyDocument));
    }
    Ok(doc)
}

fn explanation_dict(exp: &LimeExplanation) -> (f64, BTreeMap<String, f64>) {
    (exp.intercept, exp.iter().map(|(w, c)| (w.to_owned(), c)).collect())
}

/// Sampled LIME; returns `(intercept, {word: coefficient})`.
#[pyfunction]
#[pyo3(signature = (model, text, n_samples=1000, kernel_width=0.25, ridge=1e-8, seed=0))]
fn explain_lime(
    model: &PyModel,
    text: &str,
    n_samples: usize,
    kernel_width: f64,
    ridge: f64,
    seed: u64,
) -> PyResult<(f64, BTreeMap<String, f64>)> {
    let cfg = LimeConfig {
        n_samples,
        kernel_width,
        ridge,
        seed,
    };
    let exp = lime::explain_lime(&model.0, &document(text)?, &cfg).map_err(py_err)?;
    Ok(explanation_dict(&exp))
}

/// Population LIME surrogate, enumerated exactly.
#[pyfunction]
#[pyo3(signature = (model, text, kernel_width=0.25, ridge=1e-8))]
fn exact_lime(model: &PyModel, text: &str, kernel_width: f64, ridge: f64) -> PyResult<(f64, BTreeMap<String, f64>)> {
    let exp = lime::exact_expected_explanation(&model.0, &document(text)?, kernel_width, ridge).map_err(py_err)?;
    Ok(explanation_dict(&exp))
}

/// Result of an Anchors search.
#[pyclass(frozen, get_all, name = "Anchor")]
struct PyAnchor {
    words: Vec<String>,
    positions: Vec<usize>,
    precision: f64,
    converged: bool,
    model_calls: usize,
}

#[pymethods]
impl PyAnchor {
    fn __repr__(&self) -> String {
        format!("Anchor(words={:?}, precision={})", self.words, self.precision)
    }
}

/// Anchors search. `exact=True` runs exhaustive search with exact
/// precision; otherwise beam search with sampled precision.
#[pyfunction]
#[pyo3(signature = (model, text, exact=false, epsilon=0.05, delta=0.1, batch_size=10, beam_width=4,
                    max_batches=200, all_occurrences=false, seed=0))]
#[allow(clippy::too_many_arguments)]
fn anchor(
    model: &PyModel,
    text: &str,
    exact: bool,
    epsilon: f64,
    delta: f64,
    batch_size: usize,
    beam_width: usize,
    max_batches: usize,
    all_occurrences: bool,
    seed: u64,
) -> PyResult<PyAnchor> {
    let cfg = AnchorConfig {
        epsilon,
        delta,
        batch_size,
        beam_width,
        max_batches,
        occurrences: if all_occurrences {
            Occurrences::All
        } else {
            Occurrences::First
        },
        seed,
    };
    let mode = if exact {
        PrecisionMode::Exact
    } else {
        PrecisionMode::Sampled
    };
    let a = run_anchors(&model.0, &document(text)?, &cfg, mode).map_err(py_err)?;
    Ok(PyAnchor {
        words: a.distinct_words(),
        positions: a.positions,
        precision: a.precision,
        converged: a.converged,
        model_calls: a.model_calls,
    })
}

/// Exact precision of anchoring `positions`: closed form for DNF models,
/// enumeration otherwise.
#[pyfunction]
fn exact_precision(model: &PyModel, text: &str, positions: Vec<usize>) -> PyResult<f64> {
    let doc = document(text)?;
    match &model.0 {
        models::Model::Dnf(c) => anchors::exact_precision_dnf(c, &doc, &positions),
        m => anchors::exact_precision_bruteforce(m, &doc, &positions),
    }
    .map_err(py_err)
}

#[pyfunction]
fn jaccard(a: Vec<String>, b: Vec<String>) -> f64 {
    metrics::jaccard(&a, &b)
}

/// Mean and population std of the Jaccard similarity over
/// `(explainer_words, ground_truth_words)` pairs.
#[pyfunction]
fn l_index(pairs: Vec<(Vec<String>, Vec<String>)>) -> PyResult<(f64, f64)> {
    let m = metrics::l_index(&pairs).map_err(py_err)?;
    Ok((m.mean, m.std))
}

/// Top `n` words of a logistic model's contributions on `text`.
#[pyfunction]
#[pyo3(signature = (model, text, n, absolute=false))]
fn ground_truth_top_n(model: &PyModel, text: &str, n: usize, absolute: bool) -> PyResult<Vec<String>> {
    let ranking = if absolute {
        metrics::Ranking::Absolute
    } else {
        metrics::Ranking::Signed
    };
    metrics::ground_truth_top_n(logistic(&model.0)?, &document(text)?, n, ranking).map_err(py_err)
}

#[pymodule]
fn wordlens(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyVectorizer>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyAnchor>()?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(explain_lime, m)?)?;
    m.add_function(wrap_pyfunction!(exact_lime, m)?)?;
    m.add_function(wrap_pyfunction!(anchor, m)?)?;
    m.add_function(wrap_pyfunction!(exact_precision, m)?)?;
    m.add_function(wrap_pyfunction!(jaccard, m)?)?;
    m.add_function(wrap_pyfunction!(l_index, m)?)?;
    m.add_function(wrap_pyfunction!(ground_truth_top_n, m)?)?;
    Ok(())
}
