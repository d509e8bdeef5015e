//! Local explanations for text classifiers.
//!
//! `wordlens` implements LIME and Anchors for text from scratch over
//! transparent classifiers (word-presence rules and logistic models on
//! TF-IDF features), together with exact oracles for both explainers and the
//! ℓ-index, which scores how well an explainer recovers the words a logistic
//! model actually relies on.

pub mod anchors;
pub mod bench;
pub mod corpus;
mod error;
pub mod lime;
pub mod metrics;
pub mod models;
pub mod wls;

pub use anchors::{Anchor, AnchorConfig, Occurrences, PrecisionEstimate};
pub use corpus::{load_corpus_csv, Corpus, Document, LocalDictionary, TfIdfVectorizer};
pub use error::{Error, Result};
pub use lime::{LimeConfig, LimeExplanation};
pub use metrics::{jaccard, LIndexReport, Ranking};
pub use models::{Classifier, DnfClassifier, LogisticClassifier, Model, TrainConfig};
