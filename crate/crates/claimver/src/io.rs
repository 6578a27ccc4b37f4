//! JSONL readers and writers for corpora, claims, gold evidence,
//! predictions, and stage score files.
//!
//! File schemas mirror the released dataset so public data loads
//! unmodified. All writers are deterministic: identical inputs produce
//! byte-identical files. Paths ending in `.gz` are read and written
//! gzip-compressed.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde_json::{Map, Value};

use crate::data::{
    AbstractDoc, Claim, ClaimId, Corpus, DocId, GoldEntry, GoldEvidence, Label, PredictedEntry,
    Prediction, Rationale,
};
use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Stage-adapter payload types
// ---------------------------------------------------------------------------

/// Per-sentence relevance scores for one (claim, abstract) pair, as produced
/// by an externally trained sentence scorer. One score per abstract
/// sentence, each in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceScores {
    pub claim_id: ClaimId,
    pub doc_id: DocId,
    pub scores: Vec<f64>,
}

/// Label distribution for one (claim, abstract) pair, as produced by an
/// externally trained label predictor. Components sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelProbs {
    pub claim_id: ClaimId,
    pub doc_id: DocId,
    /// Probabilities in the fixed order (SUPPORTS, REFUTES, NOT_ENOUGH_INFO).
    pub probs: [f64; 3],
}

impl LabelProbs {
    pub fn get(&self, label: Label) -> f64 {
        match label {
            Label::Supports => self.probs[0],
            Label::Refutes => self.probs[1],
            Label::NotEnoughInfo => self.probs[2],
        }
    }
}

const SCORE_SLACK: f64 = 1e-9;
const PROB_SUM_SLACK: f64 = 1e-6;

// ---------------------------------------------------------------------------
// Line-oriented plumbing
// ---------------------------------------------------------------------------

fn is_gzip(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

/// Opens a plain or gzip-compressed file for buffered reading.
pub fn open_reader(path: &Path) -> Result<Box<dyn BufRead>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    if is_gzip(path) {
        Ok(Box::new(BufReader::new(MultiGzDecoder::new(file))))
    } else {
        Ok(Box::new(BufReader::new(file)))
    }
}

/// Opens a plain or gzip-compressed file for buffered writing.
pub fn open_writer(path: &Path) -> Result<Box<dyn Write>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    if is_gzip(path) {
        Ok(Box::new(BufWriter::new(GzEncoder::new(
            file,
            Compression::default(),
        ))))
    } else {
        Ok(Box::new(BufWriter::new(file)))
    }
}

/// Parses every non-blank line as a JSON object and hands it to `f` with
/// its 1-based line number.
pub(crate) fn for_each_line<F>(path: &Path, mut f: F) -> Result<()>
where
    F: FnMut(usize, Map<String, Value>) -> Result<()>,
{
    let reader = open_reader(path)?;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line)
            .map_err(|e| Error::parse(path, line_no, format!("malformed JSON: {e}")))?;
        let Value::Object(obj) = value else {
            return Err(Error::parse(path, line_no, "expected a JSON object"));
        };
        f(line_no, obj)?;
    }
    Ok(())
}

/// Field-extraction context for one line; unknown keys are logged once the
/// known set is declared.
pub(crate) struct Fields<'a> {
    path: &'a Path,
    line: usize,
    obj: Map<String, Value>,
}

impl<'a> Fields<'a> {
    pub(crate) fn new(path: &'a Path, line: usize, obj: Map<String, Value>, known: &[&str]) -> Fields<'a> {
        for key in obj.keys() {
            if !known.contains(&key.as_str()) {
                log::warn!("{}:{}: ignoring unknown field {key:?}", path.display(), line);
            }
        }
        Fields { path, line, obj }
    }

    pub(crate) fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse(self.path, self.line, msg)
    }

    /// Warns about keys of a nested object outside the known set.
    fn warn_unknown(&self, obj: &Map<String, Value>, known: &[&str]) {
        for key in obj.keys() {
            if !known.contains(&key.as_str()) {
                log::warn!(
                    "{}:{}: ignoring unknown field {key:?}",
                    self.path.display(),
                    self.line
                );
            }
        }
    }

    pub(crate) fn require(&mut self, key: &str) -> Result<Value> {
        self.obj
            .remove(key)
            .ok_or_else(|| self.err(format!("missing field {key:?}")))
    }

    pub(crate) fn optional(&mut self, key: &str) -> Option<Value> {
        self.obj.remove(key)
    }

    pub(crate) fn u64_value(&self, key: &str, value: &Value) -> Result<u64> {
        value
            .as_u64()
            .ok_or_else(|| self.err(format!("field {key:?} must be a non-negative integer")))
    }

    pub(crate) fn require_u64(&mut self, key: &str) -> Result<u64> {
        let v = self.require(key)?;
        self.u64_value(key, &v)
    }

    pub(crate) fn require_string(&mut self, key: &str) -> Result<String> {
        match self.require(key)? {
            Value::String(s) => Ok(s),
            _ => Err(self.err(format!("field {key:?} must be a string"))),
        }
    }

    pub(crate) fn require_bool(&mut self, key: &str) -> Result<bool> {
        match self.require(key)? {
            Value::Bool(b) => Ok(b),
            _ => Err(self.err(format!("field {key:?} must be a boolean"))),
        }
    }

    pub(crate) fn require_array(&mut self, key: &str) -> Result<Vec<Value>> {
        match self.require(key)? {
            Value::Array(a) => Ok(a),
            _ => Err(self.err(format!("field {key:?} must be an array"))),
        }
    }
}

fn value_to_usize(fields: &Fields<'_>, key: &str, value: &Value) -> Result<usize> {
    value
        .as_u64()
        .map(|v| v as usize)
        .ok_or_else(|| fields.err(format!("{key}: expected a non-negative integer")))
}

fn value_to_f64(fields: &Fields<'_>, key: &str, value: &Value) -> Result<f64> {
    value
        .as_f64()
        .filter(|v| v.is_finite())
        .ok_or_else(|| fields.err(format!("{key}: expected a finite number")))
}

fn parse_doc_key(fields: &Fields<'_>, key: &str) -> Result<DocId> {
    key.parse::<DocId>()
        .map_err(|_| fields.err(format!("evidence key {key:?} is not a document id")))
}

// ---------------------------------------------------------------------------
// Corpus
// ---------------------------------------------------------------------------

/// Loads a corpus file: one JSON object per line with fields
/// `doc_id`, `title`, `abstract` (sentence list), and `structured`.
pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let mut corpus = Corpus::new();
    let mut first_line: BTreeMap<DocId, usize> = BTreeMap::new();
    for_each_line(path, |line_no, obj| {
        let mut f = Fields::new(path, line_no, obj, &["doc_id", "title", "abstract", "structured"]);
        let doc_id = f.require_u64("doc_id")?;
        let title = f.require_string("title")?;
        let raw_sentences = f.require_array("abstract")?;
        let mut sentences = Vec::with_capacity(raw_sentences.len());
        for (i, s) in raw_sentences.iter().enumerate() {
            match s {
                Value::String(text) => sentences.push(text.clone()),
                _ => return Err(f.err(format!("abstract[{i}] must be a string"))),
            }
        }
        let structured = f.require_bool("structured")?;
        if let Some(&prev) = first_line.get(&doc_id) {
            return Err(f.err(format!(
                "duplicate doc_id {doc_id} (first seen on line {prev})"
            )));
        }
        first_line.insert(doc_id, line_no);
        let doc = AbstractDoc::new(doc_id, title, sentences, structured)
            .map_err(|e| f.err(e.to_string()))?;
        corpus.insert(doc).map_err(|e| f.err(e.to_string()))?;
        Ok(())
    })?;
    Ok(corpus)
}

/// Writes a corpus in the same schema `load_corpus` reads, ascending doc id.
pub fn write_corpus(corpus: &Corpus, path: &Path) -> Result<()> {
    let mut out = open_writer(path)?;
    for doc in corpus.iter() {
        let line = serde_json::json!({
            "doc_id": doc.doc_id,
            "title": doc.title,
            "abstract": doc.sentences,
            "structured": doc.structured,
        });
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Claims and gold evidence
// ---------------------------------------------------------------------------

fn parse_gold_rationales(
    f: &Fields<'_>,
    claim_id: ClaimId,
    doc_id: DocId,
    raw: &[Value],
) -> Result<GoldEntry> {
    let mut label: Option<Label> = None;
    let mut rationales: Vec<Rationale> = Vec::new();
    for item in raw {
        let Value::Object(obj) = item else {
            return Err(f.err(format!("claim {claim_id} doc {doc_id}: rationale must be an object")));
        };
        f.warn_unknown(obj, &["sentences", "label"]);
        let token = obj
            .get("label")
            .and_then(Value::as_str)
            .ok_or_else(|| f.err(format!("claim {claim_id} doc {doc_id}: missing rationale label")))?;
        let parsed = Label::parse(token).map_err(|e| f.err(e.to_string()))?;
        match label {
            None => label = Some(parsed),
            Some(existing) if existing != parsed => {
                return Err(f.err(format!(
                    "claim {claim_id} doc {doc_id}: conflicting labels {existing} and {parsed}"
                )));
            }
            Some(_) => {}
        }
        let raw_sentences = obj
            .get("sentences")
            .and_then(Value::as_array)
            .ok_or_else(|| f.err(format!("claim {claim_id} doc {doc_id}: missing rationale sentences")))?;
        let mut rationale = Rationale::new();
        for s in raw_sentences {
            rationale.insert(value_to_usize(f, "sentences", s)?);
        }
        rationales.push(rationale);
    }
    Ok(GoldEntry {
        label: label.ok_or_else(|| {
            f.err(format!("claim {claim_id} doc {doc_id}: evidence entry has no rationales"))
        })?,
        rationales,
    })
}

fn load_claims_inner(path: &Path) -> Result<(Vec<Claim>, Vec<GoldEvidence>)> {
    let mut claims = Vec::new();
    let mut gold = Vec::new();
    let mut first_line: BTreeMap<ClaimId, usize> = BTreeMap::new();
    for_each_line(path, |line_no, obj| {
        let mut f = Fields::new(path, line_no, obj, &["id", "claim", "evidence", "cited_doc_ids"]);
        let id = f.require_u64("id")?;
        if let Some(&prev) = first_line.get(&id) {
            return Err(f.err(format!("duplicate claim id {id} (first seen on line {prev})")));
        }
        first_line.insert(id, line_no);
        let text = f.require_string("claim")?;
        let cited_doc_ids = match f.optional("cited_doc_ids") {
            Some(Value::Array(a)) => a
                .iter()
                .map(|v| f.u64_value("cited_doc_ids", v))
                .collect::<Result<Vec<DocId>>>()?,
            Some(_) => return Err(f.err("field \"cited_doc_ids\" must be an array")),
            None => Vec::new(),
        };
        if let Some(raw_evidence) = f.optional("evidence") {
            let Value::Object(map) = raw_evidence else {
                return Err(f.err("field \"evidence\" must be an object"));
            };
            let mut ev = GoldEvidence::new(id);
            for (key, value) in &map {
                let doc_id = parse_doc_key(&f, key)?;
                let Value::Array(items) = value else {
                    return Err(f.err(format!("evidence[{key}] must be an array of rationales")));
                };
                let entry = parse_gold_rationales(&f, id, doc_id, items)?;
                ev.entries.insert(doc_id, entry);
            }
            gold.push(ev);
        }
        claims.push(Claim {
            id,
            text,
            cited_doc_ids,
        });
        Ok(())
    })?;
    Ok((claims, gold))
}

/// Loads a claim file without cross-checking against a corpus. Intended for
/// validation tooling that wants to report invariant breaches as data
/// rather than abort on the first one.
pub fn load_claims_lenient(path: &Path) -> Result<(Vec<Claim>, Vec<GoldEvidence>)> {
    load_claims_inner(path)
}

/// Loads a claim file and enforces every gold-evidence invariant against
/// the paired corpus: evidence documents must exist, rationale indices must
/// be in range, and rationales of one abstract may not overlap.
pub fn load_claims(path: &Path, corpus: &Corpus) -> Result<(Vec<Claim>, Vec<GoldEvidence>)> {
    let (claims, gold) = load_claims_inner(path)?;
    for ev in &gold {
        for (&doc_id, entry) in &ev.entries {
            if entry.label == Label::NotEnoughInfo {
                return Err(Error::invalid(format!(
                    "{}: claim {} doc {doc_id}: NOT_ENOUGH_INFO is encoded by absence, not as an evidence label",
                    path.display(),
                    ev.claim_id
                )));
            }
            let doc = corpus.get(doc_id).ok_or_else(|| {
                Error::invalid(format!(
                    "{}: claim {} has evidence on doc {doc_id} absent from corpus",
                    path.display(),
                    ev.claim_id
                ))
            })?;
            let mut seen = std::collections::BTreeSet::new();
            for rationale in &entry.rationales {
                if rationale.is_empty() {
                    return Err(Error::invalid(format!(
                        "{}: claim {} doc {doc_id} has an empty rationale",
                        path.display(),
                        ev.claim_id
                    )));
                }
                for &s in rationale {
                    if s >= doc.len() {
                        return Err(Error::invalid(format!(
                            "{}: claim {} doc {doc_id} rationale sentence {s} out of range",
                            path.display(),
                            ev.claim_id
                        )));
                    }
                    if !seen.insert(s) {
                        return Err(Error::invalid(format!(
                            "{}: claim {} doc {doc_id} rationales overlap at sentence {s}",
                            path.display(),
                            ev.claim_id
                        )));
                    }
                }
            }
        }
    }
    Ok((claims, gold))
}

// ---------------------------------------------------------------------------
// Predictions
// ---------------------------------------------------------------------------

/// Loads predictions: one line per claim, `{"id": .., "evidence": {doc:
/// {"sentences": [..], "label": ".."}}}`, with an optional `scores` array
/// parallel to `sentences`.
pub fn load_predictions(path: &Path, corpus: &Corpus) -> Result<Vec<Prediction>> {
    let mut preds = Vec::new();
    let mut seen: BTreeMap<ClaimId, usize> = BTreeMap::new();
    for_each_line(path, |line_no, obj| {
        let mut f = Fields::new(path, line_no, obj, &["id", "evidence"]);
        let id = f.require_u64("id")?;
        if let Some(&prev) = seen.get(&id) {
            return Err(f.err(format!("duplicate prediction for claim {id} (first on line {prev})")));
        }
        seen.insert(id, line_no);
        let Value::Object(map) = f.require("evidence")? else {
            return Err(f.err("field \"evidence\" must be an object"));
        };
        let mut pred = Prediction::new(id);
        for (key, value) in &map {
            let doc_id = parse_doc_key(&f, key)?;
            let Value::Object(entry_obj) = value else {
                return Err(f.err(format!("evidence[{key}] must be an object")));
            };
            f.warn_unknown(entry_obj, &["sentences", "label", "scores"]);
            let token = entry_obj
                .get("label")
                .and_then(Value::as_str)
                .ok_or_else(|| f.err(format!("evidence[{key}]: missing label")))?;
            let label = Label::parse(token).map_err(|e| f.err(e.to_string()))?;
            if label == Label::NotEnoughInfo {
                return Err(f.err(format!(
                    "evidence[{key}]: NOT_ENOUGH_INFO entries must be omitted"
                )));
            }
            let raw_sentences = entry_obj
                .get("sentences")
                .and_then(Value::as_array)
                .ok_or_else(|| f.err(format!("evidence[{key}]: missing sentences")))?;
            let doc = corpus
                .get(doc_id)
                .ok_or_else(|| f.err(format!("predicted doc {doc_id} absent from corpus")))?;
            let mut sentences = Vec::with_capacity(raw_sentences.len());
            for s in raw_sentences {
                let s = value_to_usize(&f, "sentences", s)?;
                if s >= doc.len() {
                    return Err(f.err(format!(
                        "evidence[{key}]: sentence {s} out of range (abstract has {})",
                        doc.len()
                    )));
                }
                sentences.push(s);
            }
            let mut entry = PredictedEntry::new(label, sentences.iter().copied());
            if let Some(raw_scores) = entry_obj.get("scores") {
                let Value::Array(raw_scores) = raw_scores else {
                    return Err(f.err(format!("evidence[{key}]: scores must be an array")));
                };
                if raw_scores.len() != sentences.len() {
                    return Err(f.err(format!(
                        "evidence[{key}]: {} scores for {} sentences",
                        raw_scores.len(),
                        sentences.len()
                    )));
                }
                let mut scores = BTreeMap::new();
                for (s, v) in sentences.iter().zip(raw_scores) {
                    scores.insert(*s, value_to_f64(&f, "scores", v)?);
                }
                entry = entry.with_scores(scores);
            }
            pred.entries.insert(doc_id, entry);
        }
        preds.push(pred);
        Ok(())
    })?;
    Ok(preds)
}

/// Writes predictions sorted by claim id, evidence keys in numeric order.
/// Writing then loading reproduces the same in-memory predictions.
pub fn write_predictions(preds: &[Prediction], path: &Path) -> Result<()> {
    let mut sorted: Vec<&Prediction> = preds.iter().collect();
    sorted.sort_by_key(|p| p.claim_id);
    let mut out = open_writer(path)?;
    for pred in sorted {
        let mut evidence = Map::new();
        for (doc_id, entry) in &pred.entries {
            let sentences: Vec<usize> = entry.sentences.iter().copied().collect();
            let mut entry_obj = Map::new();
            entry_obj.insert("sentences".into(), serde_json::json!(sentences));
            entry_obj.insert("label".into(), Value::String(entry.label.as_str().into()));
            if let Some(scores) = &entry.scores {
                let ordered: Vec<f64> = sentences
                    .iter()
                    .map(|s| {
                        scores.get(s).copied().ok_or_else(|| {
                            Error::invalid(format!(
                                "claim {} doc {doc_id}: sentence {s} has no score",
                                pred.claim_id
                            ))
                        })
                    })
                    .collect::<Result<_>>()?;
                entry_obj.insert("scores".into(), serde_json::json!(ordered));
            }
            evidence.insert(doc_id.to_string(), Value::Object(entry_obj));
        }
        let mut line = Map::new();
        line.insert("id".into(), serde_json::json!(pred.claim_id));
        line.insert("evidence".into(), Value::Object(evidence));
        writeln!(out, "{}", Value::Object(line)).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Stage score files
// ---------------------------------------------------------------------------

/// Loads sentence-score lines `{"claim_id", "doc_id", "scores": [..]}` and
/// checks each against the corpus: one score per abstract sentence, each in
/// [0, 1] up to a small slack.
pub fn load_sentence_scores(path: &Path, corpus: &Corpus) -> Result<Vec<SentenceScores>> {
    let mut all = Vec::new();
    for_each_line(path, |line_no, obj| {
        let mut f = Fields::new(path, line_no, obj, &["claim_id", "doc_id", "scores"]);
        let claim_id = f.require_u64("claim_id")?;
        let doc_id = f.require_u64("doc_id")?;
        let raw = f.require_array("scores")?;
        let doc = corpus
            .get(doc_id)
            .ok_or_else(|| f.err(format!("doc {doc_id} absent from corpus")))?;
        if raw.len() != doc.len() {
            return Err(f.err(format!(
                "{} scores for a {}-sentence abstract",
                raw.len(),
                doc.len()
            )));
        }
        let mut scores = Vec::with_capacity(raw.len());
        for v in &raw {
            let score = value_to_f64(&f, "scores", v)?;
            if !(-SCORE_SLACK..=1.0 + SCORE_SLACK).contains(&score) {
                return Err(f.err(format!("score {score} outside [0, 1]")));
            }
            scores.push(score.clamp(0.0, 1.0));
        }
        all.push(SentenceScores {
            claim_id,
            doc_id,
            scores,
        });
        Ok(())
    })?;
    Ok(all)
}

/// Loads label-probability lines `{"claim_id", "doc_id", "probs":
/// {"SUPPORTS": .., "REFUTES": .., "NOT_ENOUGH_INFO": ..}}`; the three
/// components must sum to 1.
pub fn load_label_probs(path: &Path) -> Result<Vec<LabelProbs>> {
    let mut all = Vec::new();
    for_each_line(path, |line_no, obj| {
        let mut f = Fields::new(path, line_no, obj, &["claim_id", "doc_id", "probs"]);
        let claim_id = f.require_u64("claim_id")?;
        let doc_id = f.require_u64("doc_id")?;
        let Value::Object(map) = f.require("probs")? else {
            return Err(f.err("field \"probs\" must be an object"));
        };
        let mut probs = [0.0f64; 3];
        for (i, label) in Label::ALL.iter().enumerate() {
            let v = map
                .get(label.as_str())
                .ok_or_else(|| f.err(format!("probs missing {}", label.as_str())))?;
            let p = value_to_f64(&f, "probs", v)?;
            if !(0.0..=1.0 + SCORE_SLACK).contains(&p) {
                return Err(f.err(format!("probability {p} outside [0, 1]")));
            }
            probs[i] = p;
        }
        for key in map.keys() {
            if Label::ALL.iter().all(|l| l.as_str() != key) {
                log::warn!("{}:{}: ignoring unknown probs key {key:?}", path.display(), line_no);
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_SLACK {
            return Err(f.err(format!("probabilities sum to {sum}, expected 1")));
        }
        all.push(LabelProbs {
            claim_id,
            doc_id,
            probs,
        });
        Ok(())
    })?;
    Ok(all)
}
