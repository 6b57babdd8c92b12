//! Raw text to weighted documents.
//!
//! A [`Document`] is the set of distinct in-vocabulary words of a text,
//! ordered by ascending word id, with a strictly positive weight vector that
//! sums to one.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::embeddings::{CoordinateExtrema, EmbeddingTable};
use crate::error::{Error, Result};

const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

/// One `label<TAB>text` line of a dataset file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawRecord {
    pub label: String,
    pub text: String,
}

/// Normalized bag of in-vocabulary words.
#[derive(Clone, Debug, PartialEq)]
pub struct Document {
    table_id: u64,
    word_ids: Vec<usize>,
    weights: Vec<f64>,
}

impl Document {
    /// Validates and wraps a weighted word set. `word_ids` must be strictly
    /// increasing and the weights positive with unit sum.
    pub fn new(table_id: u64, word_ids: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        if word_ids.is_empty() {
            return Err(Error::InvalidDocument("no words".into()));
        }
        if word_ids.len() != weights.len() {
            return Err(Error::InvalidDocument(format!(
                "{} word ids but {} weights",
                word_ids.len(),
                weights.len()
            )));
        }
        if word_ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidDocument(
                "word ids must be distinct and ascending".into(),
            ));
        }
        if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidDocument("weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::InvalidDocument(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(Document {
            table_id,
            word_ids,
            weights,
        })
    }

    /// Builds a document from raw per-word masses, normalizing them.
    pub fn from_masses(table_id: u64, masses: BTreeMap<usize, f64>) -> Result<Self> {
        let total: f64 = masses.values().sum();
        let (word_ids, weights) = masses.into_iter().map(|(id, m)| (id, m / total)).unzip();
        Document::new(table_id, word_ids, weights)
    }

    pub fn table_id(&self) -> u64 {
        self.table_id
    }

    pub fn word_ids(&self) -> &[usize] {
        &self.word_ids
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of distinct words, `|x|`.
    pub fn len(&self) -> usize {
        self.word_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word_ids.is_empty()
    }
}

/// Inverse document frequencies fitted on a tokenized corpus.
///
/// `idf(w) = ln((1 + N) / (1 + df(w))) + 1`; unseen words get `ln(1 + N) + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Idf {
    n_docs: usize,
    values: HashMap<String, f64>,
}

impl Idf {
    pub fn fit<S: AsRef<str>>(docs: &[Vec<S>]) -> Self {
        let mut df: HashMap<&str, usize> = HashMap::new();
        for doc in docs {
            let distinct: HashSet<&str> = doc.iter().map(AsRef::as_ref).collect();
            for w in distinct {
                *df.entry(w).or_insert(0) += 1;
            }
        }
        let n = docs.len() as f64;
        let values = df
            .into_iter()
            .map(|(w, df)| (w.to_owned(), ((1.0 + n) / (1.0 + df as f64)).ln() + 1.0))
            .collect();
        Idf {
            n_docs: docs.len(),
            values,
        }
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn get(&self, token: &str) -> f64 {
        self.values
            .get(token)
            .copied()
            .unwrap_or_else(|| (1.0 + self.n_docs as f64).ln() + 1.0)
    }
}

/// Per-word weighting of a document.
#[derive(Clone, Debug, PartialEq)]
pub enum WeightScheme {
    /// Normalized counts.
    Nbow,
    /// Counts times inverse document frequency, renormalized.
    TfIdf(Idf),
}

/// Lower-cases, splits on Unicode whitespace, strips leading and trailing
/// non-alphanumeric characters and removes stop words. Order is preserved.
pub fn tokenize(text: &str, stopwords: &HashSet<String>) -> Vec<String> {
    text.split_whitespace()
        .map(|raw| {
            raw.to_lowercase()
                .trim_matches(|c: char| !c.is_alphanumeric())
                .to_owned()
        })
        .filter(|t| !t.is_empty() && !stopwords.contains(t))
        .collect()
}

/// One token per line; blank lines are ignored and tokens are lower-cased.
pub fn load_stopwords(path: impl AsRef<Path>) -> Result<HashSet<String>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut words = HashSet::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let word = line.trim();
        if !word.is_empty() {
            words.insert(word.to_lowercase());
        }
    }
    Ok(words)
}

/// Builds a [`Document`] from tokens, dropping out-of-vocabulary ones.
pub fn build_document<S: AsRef<str>>(
    tokens: &[S],
    table: &EmbeddingTable,
    scheme: &WeightScheme,
) -> Result<Document> {
    let mut counts: BTreeMap<usize, (f64, &str)> = BTreeMap::new();
    for token in tokens {
        let token = token.as_ref();
        if let Some(id) = table.id(token) {
            counts.entry(id).or_insert((0.0, token)).0 += 1.0;
        }
    }
    if counts.is_empty() {
        return Err(Error::EmptyDocument {
            tokens: tokens.iter().map(|t| t.as_ref().to_owned()).collect(),
        });
    }
    let masses = counts
        .into_iter()
        .map(|(id, (count, token))| {
            let mass = match scheme {
                WeightScheme::Nbow => count,
                WeightScheme::TfIdf(idf) => count * idf.get(token),
            };
            (id, mass)
        })
        .collect();
    Document::from_masses(table.fingerprint(), masses)
}

/// Reads `label<TAB>text` lines. Returns the parsed records plus the number
/// of malformed lines (no tab, empty label or blank text).
pub fn read_records(path: impl AsRef<Path>) -> Result<(Vec<RawRecord>, usize)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    let mut malformed = 0;
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match line.split_once('\t') {
            Some((label, text)) if !label.trim().is_empty() && !text.trim().is_empty() => {
                records.push(RawRecord {
                    label: label.trim().to_owned(),
                    text: text.to_owned(),
                })
            }
            _ => malformed += 1,
        }
    }
    Ok((records, malformed))
}

/// Labeled, tokenized records before vocabulary filtering.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenizedDataset {
    pub labels: Vec<String>,
    pub tokens: Vec<Vec<String>>,
    /// Lines of the source file that could not be parsed.
    pub malformed: usize,
}

impl TokenizedDataset {
    /// Tokenizes records and prunes words occurring fewer than
    /// `min_word_count` times across the whole dataset.
    pub fn from_records(
        records: &[RawRecord],
        stopwords: &HashSet<String>,
        min_word_count: usize,
    ) -> Self {
        let mut tokens: Vec<Vec<String>> = records
            .iter()
            .map(|r| tokenize(&r.text, stopwords))
            .collect();
        if min_word_count > 1 {
            let mut counts: HashMap<&str, usize> = HashMap::new();
            for t in tokens.iter().flatten() {
                *counts.entry(t.as_str()).or_insert(0) += 1;
            }
            let rare: HashSet<String> = counts
                .into_iter()
                .filter(|&(_, c)| c < min_word_count)
                .map(|(t, _)| t.to_owned())
                .collect();
            for doc in tokens.iter_mut() {
                doc.retain(|t| !rare.contains(t));
            }
        }
        TokenizedDataset {
            labels: records.iter().map(|r| r.label.clone()).collect(),
            tokens,
            malformed: 0,
        }
    }

    pub fn load(
        path: impl AsRef<Path>,
        stopwords: &HashSet<String>,
        min_word_count: usize,
    ) -> Result<Self> {
        let (records, malformed) = read_records(path)?;
        let mut dataset = Self::from_records(&records, stopwords, min_word_count);
        dataset.malformed = malformed;
        Ok(dataset)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Sorted distinct label names; label ids index into this list.
    pub fn label_names(&self) -> Vec<String> {
        self.labels
            .iter()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Fits IDF on the records at `indices`.
    pub fn fit_idf(&self, indices: &[usize]) -> Idf {
        let docs: Vec<&Vec<String>> = indices.iter().map(|&i| &self.tokens[i]).collect();
        let docs: Vec<Vec<&str>> = docs
            .iter()
            .map(|d| d.iter().map(String::as_str).collect())
            .collect();
        Idf::fit(&docs)
    }
}

/// Documents with labels, all built against one embedding table.
#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub documents: Vec<Document>,
    pub labels: Vec<usize>,
    pub label_names: Vec<String>,
    pub table_id: u64,
    /// Index of each document's record in the source dataset.
    pub source_index: Vec<usize>,
    /// Records dropped because no token was in the vocabulary, plus
    /// malformed lines.
    pub dropped: usize,
}

impl Corpus {
    /// Builds documents for the records at `indices` (all records when
    /// `None`). Records without in-vocabulary tokens are dropped and counted.
    pub fn build(
        dataset: &TokenizedDataset,
        indices: Option<&[usize]>,
        table: &EmbeddingTable,
        scheme: &WeightScheme,
        label_names: &[String],
    ) -> Result<Self> {
        let label_ids: HashMap<&str, usize> = label_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let all: Vec<usize>;
        let indices = match indices {
            Some(ix) => ix,
            None => {
                all = (0..dataset.len()).collect();
                &all
            }
        };
        let mut corpus = Corpus {
            documents: Vec::with_capacity(indices.len()),
            labels: Vec::with_capacity(indices.len()),
            label_names: label_names.to_vec(),
            table_id: table.fingerprint(),
            source_index: Vec::with_capacity(indices.len()),
            dropped: 0,
        };
        for &i in indices {
            let label = *label_ids.get(dataset.labels[i].as_str()).ok_or_else(|| {
                Error::InvalidParameter(format!("unknown label {:?}", dataset.labels[i]))
            })?;
            match build_document(&dataset.tokens[i], table, scheme) {
                Ok(doc) => {
                    corpus.documents.push(doc);
                    corpus.labels.push(label);
                    corpus.source_index.push(i);
                }
                Err(Error::EmptyDocument { .. }) => corpus.dropped += 1,
                Err(e) => return Err(e),
            }
        }
        if corpus.documents.is_empty() {
            return Err(Error::NoData(format!(
                "all {} records were dropped",
                indices.len()
            )));
        }
        Ok(corpus)
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> Corpus {
        Corpus {
            documents: indices.iter().map(|&i| self.documents[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            label_names: self.label_names.clone(),
            table_id: self.table_id,
            source_index: indices.iter().map(|&i| self.source_index[i]).collect(),
            dropped: 0,
        }
    }

    /// Distinct word ids used by any document, ascending.
    pub fn used_word_ids(&self) -> Vec<usize> {
        used_word_ids(&self.documents)
    }

    pub fn coordinate_extrema(&self, table: &EmbeddingTable) -> Result<CoordinateExtrema> {
        table.coordinate_extrema_ids(&self.used_word_ids())
    }
}

pub fn used_word_ids(documents: &[Document]) -> Vec<usize> {
    documents
        .iter()
        .flat_map(|d| d.word_ids().iter().copied())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// Reads a dataset file and builds its corpus in one step.
pub fn load_dataset(
    path: impl AsRef<Path>,
    table: &EmbeddingTable,
    scheme: &WeightScheme,
    stopwords: &HashSet<String>,
) -> Result<Corpus> {
    let dataset = TokenizedDataset::load(path, stopwords, 1)?;
    if dataset.is_empty() {
        return Err(Error::NoData("dataset has no records".into()));
    }
    let names = dataset.label_names();
    let mut corpus = Corpus::build(&dataset, None, table, scheme, &names)?;
    corpus.dropped += dataset.malformed;
    Ok(corpus)
}
