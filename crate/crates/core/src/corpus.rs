//! Tokenization, per-document dictionaries, TF-IDF vectorization and CSV
//! corpus ingestion.
//!
//! Tokens are lowercased maximal alphanumeric runs. The TF-IDF map uses raw
//! term counts, smooth idf `ln((1 + N) / (1 + df)) + 1` and per-document L2
//! normalization, so a coordinate is positive exactly when its word occurs in
//! the document. Out-of-vocabulary tokens contribute nothing.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A tokenized text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    tokens: Vec<String>,
    source_text: String,
}

impl Document {
    /// Tokenizes `text`: lowercased maximal alphanumeric runs, in order.
    pub fn tokenize(text: &str) -> Self {
        let tokens = text
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(str::to_lowercase)
            .collect();
        Document {
            tokens,
            source_text: text.to_owned(),
        }
    }

    /// Builds a document directly from tokens; the source text is their
    /// space-join.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        let source_text = tokens.join(" ");
        Document {
            tokens,
            source_text,
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn source_text(&self) -> &str {
        &self.source_text
    }

    /// Number of tokens, `b`.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.tokens.iter().any(|t| t == word)
    }

    pub fn local_dictionary(&self) -> LocalDictionary {
        LocalDictionary::new(self)
    }
}

impl fmt::Display for Document {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tokens.join(" "))
    }
}

/// One distinct word of a document with the positions it occupies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalEntry {
    pub word: String,
    pub positions: Vec<usize>,
}

impl LocalEntry {
    /// Multiplicity `m_j`.
    pub fn multiplicity(&self) -> usize {
        self.positions.len()
    }

    pub fn first_position(&self) -> usize {
        self.positions[0]
    }
}

/// The distinct words of one document, in order of first occurrence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalDictionary {
    entries: Vec<LocalEntry>,
    index: HashMap<String, usize>,
}

impl LocalDictionary {
    pub fn new(doc: &Document) -> Self {
        let mut entries: Vec<LocalEntry> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        for (pos, token) in doc.tokens().iter().enumerate() {
            match index.get(token) {
                Some(&i) => entries[i].positions.push(pos),
                None => {
                    index.insert(token.clone(), entries.len());
                    entries.push(LocalEntry {
                        word: token.clone(),
                        positions: vec![pos],
                    });
                }
            }
        }
        LocalDictionary { entries, index }
    }

    /// Number of distinct words, `d`.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[LocalEntry] {
        &self.entries
    }

    pub fn words(&self) -> impl Iterator<Item = &str> + '_ {
        self.entries.iter().map(|e| e.word.as_str())
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn get(&self, word: &str) -> Option<&LocalEntry> {
        self.index_of(word).map(|i| &self.entries[i])
    }

    /// Multiplicity of `word`, zero when absent.
    pub fn multiplicity(&self, word: &str) -> usize {
        self.get(word).map_or(0, LocalEntry::multiplicity)
    }
}

/// Corpus-wide vocabulary with document frequencies, sorted alphabetically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalDictionary {
    words: Vec<String>,
    doc_freq: Vec<usize>,
}

impl GlobalDictionary {
    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn doc_freq(&self) -> &[usize] {
        &self.doc_freq
    }

    /// Vocabulary size `D`.
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Smooth inverse document frequency.
pub fn smooth_idf(corpus_size: usize, doc_freq: usize) -> f64 {
    ((1.0 + corpus_size as f64) / (1.0 + doc_freq as f64)).ln() + 1.0
}

/// The fitted TF-IDF map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VectorizerFile", into = "VectorizerFile")]
pub struct TfIdfVectorizer {
    vocabulary: GlobalDictionary,
    idf: Vec<f64>,
    corpus_size: usize,
    index: HashMap<String, usize>,
}

impl TfIdfVectorizer {
    /// Fits vocabulary and idf weights on every document of `corpus`.
    pub fn fit(corpus: &Corpus) -> Result<Self> {
        Self::fit_documents(corpus.documents())
    }

    pub fn fit_documents(documents: &[Document]) -> Result<Self> {
        if documents.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut df: HashMap<&str, usize> = HashMap::new();
        for doc in documents {
            let distinct: HashSet<&str> = doc.tokens().iter().map(String::as_str).collect();
            for word in distinct {
                *df.entry(word).or_insert(0) += 1;
            }
        }
        let mut pairs: Vec<(&str, usize)> = df.into_iter().collect();
        pairs.sort_unstable_by(|a, b| a.0.cmp(b.0));
        let words: Vec<String> = pairs.iter().map(|(w, _)| (*w).to_owned()).collect();
        let doc_freq: Vec<usize> = pairs.iter().map(|(_, c)| *c).collect();
        let corpus_size = documents.len();
        let idf = doc_freq.iter().map(|&c| smooth_idf(corpus_size, c)).collect();
        Ok(Self::assemble(
            GlobalDictionary { words, doc_freq },
            idf,
            corpus_size,
        ))
    }

    fn assemble(vocabulary: GlobalDictionary, idf: Vec<f64>, corpus_size: usize) -> Self {
        let index = vocabulary
            .words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        TfIdfVectorizer {
            vocabulary,
            idf,
            corpus_size,
            index,
        }
    }

    pub fn vocabulary(&self) -> &GlobalDictionary {
        &self.vocabulary
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn idf_of(&self, word: &str) -> Option<f64> {
        self.index_of(word).map(|i| self.idf[i])
    }

    pub fn corpus_size(&self) -> usize {
        self.corpus_size
    }

    pub fn dim(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    /// Nonzero coordinates of the feature map as `(index, value)`, sorted by
    /// index.
    pub fn vectorize_sparse(&self, doc: &Document) -> Vec<(usize, f64)> {
        let mut counts: Vec<(usize, f64)> = Vec::new();
        let mut slot: HashMap<usize, usize> = HashMap::new();
        for token in doc.tokens() {
            if let Some(j) = self.index_of(token) {
                match slot.get(&j) {
                    Some(&s) => counts[s].1 += 1.0,
                    None => {
                        slot.insert(j, counts.len());
                        counts.push((j, 1.0));
                    }
                }
            }
        }
        for (j, v) in counts.iter_mut() {
            *v *= self.idf[*j];
        }
        let norm = counts.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, v) in counts.iter_mut() {
                *v /= norm;
            }
        }
        counts.sort_unstable_by_key(|(j, _)| *j);
        counts
    }

    /// Dense feature vector of dimension `D`.
    pub fn vectorize(&self, doc: &Document) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (j, v) in self.vectorize_sparse(doc) {
            out[j] = v;
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
struct VectorizerFile {
    vocab: Vec<String>,
    idf: Vec<f64>,
    corpus_size: usize,
}

impl From<TfIdfVectorizer> for VectorizerFile {
    fn from(v: TfIdfVectorizer) -> Self {
        VectorizerFile {
            vocab: v.vocabulary.words,
            idf: v.idf,
            corpus_size: v.corpus_size,
        }
    }
}

impl TryFrom<VectorizerFile> for TfIdfVectorizer {
    type Error = String;

    fn try_from(file: VectorizerFile) -> std::result::Result<Self, String> {
        if file.vocab.len() != file.idf.len() {
            return Err(format!(
                "vocab has {} words but idf has {} entries",
                file.vocab.len(),
                file.idf.len()
            ));
        }
        if file.corpus_size == 0 {
            return Err("corpus_size must be positive".into());
        }
        let mut doc_freq = Vec::with_capacity(file.idf.len());
        for (word, &idf) in file.vocab.iter().zip(&file.idf) {
            if !(idf.is_finite() && idf > 0.0) {
                return Err(format!("idf for `{word}` must be positive, got {idf}"));
            }
            // invert the smooth-idf formula
            let df = ((1.0 + file.corpus_size as f64) / (idf - 1.0).exp() - 1.0).round();
            doc_freq.push(df.max(1.0) as usize);
        }
        let vectorizer = TfIdfVectorizer::assemble(
            GlobalDictionary {
                words: file.vocab,
                doc_freq,
            },
            file.idf,
            file.corpus_size,
        );
        if vectorizer.index.len() != vectorizer.vocabulary.len() {
            return Err("vocab contains duplicate words".into());
        }
        Ok(vectorizer)
    }
}

/// Documents with binary sentiment labels (1 = positive).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    documents: Vec<Document>,
    labels: Vec<u8>,
}

impl Corpus {
    pub fn new(documents: Vec<Document>, labels: Vec<u8>) -> Result<Self> {
        if documents.len() != labels.len() {
            return Err(Error::InvalidConfig(format!(
                "{} documents but {} labels",
                documents.len(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::InvalidConfig(format!("label {bad} is not binary")));
        }
        Ok(Corpus { documents, labels })
    }

    /// Tokenizes each `(text, label)` pair.
    pub fn from_texts<'a, I>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, u8)>,
    {
        let (documents, labels) = rows
            .into_iter()
            .map(|(t, l)| (Document::tokenize(t), l))
            .unzip();
        Self::new(documents, labels)
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Document, u8)> + '_ {
        self.documents.iter().zip(self.labels.iter().copied())
    }
}

fn parse_label(raw: &str) -> Option<u8> {
    match raw.trim() {
        "0" => Some(0),
        "1" => Some(1),
        _ => None,
    }
}

/// Reads a UTF-8 CSV with header `text,label`.
pub fn load_corpus_csv(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_corpus_csv(file, path)
}

pub(crate) fn read_corpus_csv<R: std::io::Read>(reader: R, path: &Path) -> Result<Corpus> {
    let row_error = |row: usize, message: String| Error::CorpusRow {
        path: path.to_owned(),
        row,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| row_error(1, e.to_string()))?.clone();
    let names: Vec<&str> = headers.iter().map(str::trim).collect();
    if names != ["text", "label"] {
        return Err(row_error(
            1,
            format!("expected header `text,label`, found `{}`", names.join(",")),
        ));
    }
    let mut documents = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        // header is row 1
        let row = i + 2;
        let record = record.map_err(|e| row_error(row, e.to_string()))?;
        let label = parse_label(&record[1]).ok_or_else(|| {
            row_error(row, format!("label `{}` is not 0 or 1", &record[1]))
        })?;
        documents.push(Document::tokenize(&record[0]));
        labels.push(label);
    }
    Corpus::new(documents, labels)
}
