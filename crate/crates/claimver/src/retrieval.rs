//! TF-IDF indexing and ranking: the abstract-retrieval stage and the
//! lexical sentence ranker used by baseline rationale selection.
//!
//! Featurization is fixed and documented so external reimplementations can
//! match it: lowercase, split on any non-alphanumeric character, n-grams
//! built within one sentence (or the title) and never across unit
//! boundaries; tf is the raw count; idf = ln((1 + N) / (1 + df)) + 1;
//! vectors are L2-normalized. Out-of-vocabulary query n-grams contribute
//! nothing.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{AbstractDoc, Corpus, DocId};
use crate::error::{Error, Result};

pub const DEFAULT_K: usize = 3;

/// Sparse feature vector sorted by feature id; unit L2 norm unless the text
/// produced zero features, in which case it is empty (the zero vector).
pub type SparseVector = Vec<(u32, f64)>;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Inclusive n-gram size range; only unigrams and bigrams are supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NgramRange {
    low: usize,
    high: usize,
}

impl NgramRange {
    pub fn new(low: usize, high: usize) -> Result<NgramRange> {
        if low < 1 || low > high || high > 2 {
            return Err(Error::usage(format!(
                "n-gram range must satisfy 1 <= low <= high <= 2, got ({low}, {high})"
            )));
        }
        Ok(NgramRange { low, high })
    }

    pub fn low(&self) -> usize {
        self.low
    }

    pub fn high(&self) -> usize {
        self.high
    }
}

impl Default for NgramRange {
    fn default() -> NgramRange {
        NgramRange { low: 1, high: 2 }
    }
}

impl std::str::FromStr for NgramRange {
    type Err = Error;

    /// Parses `"1,2"` style flags.
    fn from_str(s: &str) -> Result<NgramRange> {
        let (low, high) = s
            .split_once(',')
            .ok_or_else(|| Error::usage(format!("expected LOW,HIGH n-gram range, got {s:?}")))?;
        let low = low
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::usage(format!("bad n-gram bound {low:?}")))?;
        let high = high
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::usage(format!("bad n-gram bound {high:?}")))?;
        NgramRange::new(low, high)
    }
}

/// Which document text the index covers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldMode {
    AbstractOnly,
    #[default]
    TitleAbstract,
}

impl std::str::FromStr for FieldMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<FieldMode> {
        match s {
            "abstract" | "abstract-only" => Ok(FieldMode::AbstractOnly),
            "title+abstract" | "title-abstract" => Ok(FieldMode::TitleAbstract),
            _ => Err(Error::usage(format!(
                "unknown field mode {s:?}; expected abstract-only or title+abstract"
            ))),
        }
    }
}

impl std::fmt::Display for FieldMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FieldMode::AbstractOnly => f.write_str("abstract-only"),
            FieldMode::TitleAbstract => f.write_str("title+abstract"),
        }
    }
}

// ---------------------------------------------------------------------------
// Featurization
// ---------------------------------------------------------------------------

/// Lowercase and split on any non-alphanumeric character, dropping empties.
/// No stemming, no stop-word removal.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// All n-grams of one text unit in reading order, joined with a space.
fn unit_ngrams(unit: &str, range: NgramRange) -> Vec<String> {
    let tokens = tokenize(unit);
    let mut grams = Vec::new();
    for n in range.low..=range.high {
        if tokens.len() < n {
            continue;
        }
        for window in tokens.windows(n) {
            grams.push(window.join(" "));
        }
    }
    grams
}

fn doc_units(doc: &AbstractDoc, mode: FieldMode) -> Vec<&str> {
    let mut units: Vec<&str> = Vec::with_capacity(doc.sentences.len() + 1);
    if mode == FieldMode::TitleAbstract {
        units.push(doc.title.as_str());
    }
    units.extend(doc.sentences.iter().map(String::as_str));
    units
}

fn l2_normalize(mut vector: SparseVector) -> SparseVector {
    let norm: f64 = vector.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
    if norm > 0.0 {
        for (_, w) in &mut vector {
            *w /= norm;
        }
    }
    vector
}

fn sparse_dot(a: &SparseVector, b: &SparseVector) -> f64 {
    let mut dot = 0.0;
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                dot += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    dot
}

// ---------------------------------------------------------------------------
// Index
// ---------------------------------------------------------------------------

/// Immutable TF-IDF index over a corpus; safe for concurrent queries.
#[derive(Debug, Clone, PartialEq)]
pub struct TfIdfIndex {
    ngram_range: NgramRange,
    field_mode: FieldMode,
    vocabulary: HashMap<String, u32>,
    /// Feature id -> n-gram, for persistence and diagnostics.
    terms: Vec<String>,
    idf: Vec<f64>,
    doc_vectors: std::collections::BTreeMap<DocId, SparseVector>,
}

/// Builds a TF-IDF index. Vocabulary ids are assigned by first occurrence
/// in ascending doc-id order, so rebuilding on the same corpus yields an
/// identical index.
pub fn build_index(
    corpus: &Corpus,
    ngram_range: NgramRange,
    field_mode: FieldMode,
) -> Result<TfIdfIndex> {
    if corpus.is_empty() {
        return Err(Error::invalid("cannot index an empty corpus"));
    }

    let mut vocabulary: HashMap<String, u32> = HashMap::new();
    let mut terms: Vec<String> = Vec::new();
    let mut doc_counts: Vec<(DocId, HashMap<u32, f64>)> = Vec::with_capacity(corpus.len());

    for doc in corpus.iter() {
        let mut counts: HashMap<u32, f64> = HashMap::new();
        for unit in doc_units(doc, field_mode) {
            for gram in unit_ngrams(unit, ngram_range) {
                let next_id = terms.len() as u32;
                let id = *vocabulary.entry(gram.clone()).or_insert_with(|| {
                    terms.push(gram);
                    next_id
                });
                *counts.entry(id).or_insert(0.0) += 1.0;
            }
        }
        doc_counts.push((doc.doc_id, counts));
    }

    let n_docs = corpus.len() as f64;
    let mut df = vec![0u64; terms.len()];
    for (_, counts) in &doc_counts {
        for &id in counts.keys() {
            df[id as usize] += 1;
        }
    }
    let idf: Vec<f64> = df
        .iter()
        .map(|&d| ((1.0 + n_docs) / (1.0 + d as f64)).ln() + 1.0)
        .collect();

    let mut doc_vectors = std::collections::BTreeMap::new();
    for (doc_id, counts) in doc_counts {
        let mut vector: SparseVector = counts
            .into_iter()
            .map(|(id, tf)| (id, tf * idf[id as usize]))
            .collect();
        vector.sort_unstable_by_key(|(id, _)| *id);
        doc_vectors.insert(doc_id, l2_normalize(vector));
    }

    Ok(TfIdfIndex {
        ngram_range,
        field_mode,
        vocabulary,
        terms,
        idf,
        doc_vectors,
    })
}

impl TfIdfIndex {
    pub fn ngram_range(&self) -> NgramRange {
        self.ngram_range
    }

    pub fn field_mode(&self) -> FieldMode {
        self.field_mode
    }

    pub fn vocabulary_len(&self) -> usize {
        self.terms.len()
    }

    /// idf weight of an n-gram, if indexed.
    pub fn idf(&self, term: &str) -> Option<f64> {
        self.vocabulary.get(term).map(|&id| self.idf[id as usize])
    }

    pub fn doc_vector(&self, doc_id: DocId) -> Option<&SparseVector> {
        self.doc_vectors.get(&doc_id)
    }

    /// Featurizes free text against this index's vocabulary and idf
    /// weights; out-of-vocabulary n-grams are dropped.
    pub fn vectorize(&self, text: &str) -> SparseVector {
        let mut counts: HashMap<u32, f64> = HashMap::new();
        for gram in unit_ngrams(text, self.ngram_range) {
            if let Some(&id) = self.vocabulary.get(&gram) {
                *counts.entry(id).or_insert(0.0) += 1.0;
            }
        }
        let mut vector: SparseVector = counts
            .into_iter()
            .map(|(id, tf)| (id, tf * self.idf[id as usize]))
            .collect();
        vector.sort_unstable_by_key(|(id, _)| *id);
        l2_normalize(vector)
    }

    /// Ranks the whole corpus by cosine similarity to `query_text` and
    /// returns the top `min(k, corpus size)` documents, descending
    /// similarity, ties broken by ascending doc id.
    pub fn retrieve(&self, query_text: &str, k: usize) -> Vec<(DocId, f64)> {
        let query = self.vectorize(query_text);
        let mut ranked: Vec<(DocId, f64)> = self
            .doc_vectors
            .iter()
            .map(|(&doc_id, vector)| (doc_id, sparse_dot(&query, vector)))
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.truncate(k);
        ranked
    }

    /// Cosine similarity between the claim and each sentence of one
    /// abstract, under this index's featurization and idf weights. One
    /// score per sentence, each in [0, 1].
    pub fn rank_sentences(&self, claim_text: &str, doc: &AbstractDoc) -> Vec<f64> {
        let claim = self.vectorize(claim_text);
        doc.sentences
            .iter()
            .map(|sentence| {
                let vector = self.vectorize(sentence);
                sparse_dot(&claim, &vector).clamp(0.0, 1.0)
            })
            .collect()
    }

    /// Persists the index as a single JSON file with a versioned header.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = IndexFile {
            format_version: INDEX_FORMAT_VERSION,
            ngram_range: self.ngram_range,
            field_mode: self.field_mode,
            terms: self.terms.clone(),
            idf: self.idf.clone(),
            doc_vectors: self.doc_vectors.clone(),
        };
        let mut out = crate::io::open_writer(path)?;
        serde_json::to_writer(&mut out, &file)
            .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
        use std::io::Write;
        out.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<TfIdfIndex> {
        let reader = crate::io::open_reader(path)?;
        let file: IndexFile = serde_json::from_reader(reader)
            .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
        if file.format_version != INDEX_FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "{}: unsupported index format version {} (expected {INDEX_FORMAT_VERSION})",
                path.display(),
                file.format_version
            )));
        }
        let vocabulary = file
            .terms
            .iter()
            .enumerate()
            .map(|(id, term)| (term.clone(), id as u32))
            .collect();
        Ok(TfIdfIndex {
            ngram_range: file.ngram_range,
            field_mode: file.field_mode,
            vocabulary,
            terms: file.terms,
            idf: file.idf,
            doc_vectors: file.doc_vectors,
        })
    }
}

const INDEX_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct IndexFile {
    format_version: u32,
    ngram_range: NgramRange,
    field_mode: FieldMode,
    terms: Vec<String>,
    idf: Vec<f64>,
    doc_vectors: std::collections::BTreeMap<DocId, SparseVector>,
}
