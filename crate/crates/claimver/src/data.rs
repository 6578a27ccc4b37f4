//! Core domain types shared by every other module: labels, abstracts,
//! claims, gold evidence, predictions, and structural validation.
//!
//! All types here are immutable after construction and safe to share
//! read-only across worker threads.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Label
// ---------------------------------------------------------------------------

/// Verdict of an abstract with respect to a claim.
///
/// `NotEnoughInfo` never appears inside gold or predicted evidence maps; it
/// is encoded by the absence of an evidence entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Supports,
    Refutes,
    NotEnoughInfo,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Supports, Label::Refutes, Label::NotEnoughInfo];

    /// Canonical token used in all file formats.
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Supports => "SUPPORTS",
            Label::Refutes => "REFUTES",
            Label::NotEnoughInfo => "NOT_ENOUGH_INFO",
        }
    }

    /// Case-insensitive parse accepting the aliases used by released data:
    /// `SUPPORT`, `CONTRADICT`, `NEI`, and `NOT ENOUGH INFO`.
    pub fn parse(token: &str) -> Result<Label> {
        match token.trim().to_ascii_uppercase().as_str() {
            "SUPPORTS" | "SUPPORT" => Ok(Label::Supports),
            "REFUTES" | "CONTRADICT" => Ok(Label::Refutes),
            "NOT_ENOUGH_INFO" | "NEI" | "NOT ENOUGH INFO" => Ok(Label::NotEnoughInfo),
            _ => Err(Error::invalid(format!("unknown label token {token:?}"))),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Label> {
        Label::parse(s)
    }
}

/// Free-function alias for [`Label::parse`].
pub fn parse_label(token: &str) -> Result<Label> {
    Label::parse(token)
}

// ---------------------------------------------------------------------------
// Corpus
// ---------------------------------------------------------------------------

pub type DocId = u64;
pub type ClaimId = u64;

/// One abstract: an ordered list of sentences plus metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbstractDoc {
    pub doc_id: DocId,
    pub title: String,
    pub sentences: Vec<String>,
    /// Whether the abstract is organized into labeled sections.
    /// Only affects dataset statistics.
    pub structured: bool,
}

impl AbstractDoc {
    pub fn new(
        doc_id: DocId,
        title: impl Into<String>,
        sentences: Vec<String>,
        structured: bool,
    ) -> Result<AbstractDoc> {
        if sentences.is_empty() {
            return Err(Error::invalid(format!(
                "doc {doc_id}: abstract must contain at least one sentence"
            )));
        }
        if let Some(i) = sentences.iter().position(|s| s.trim().is_empty()) {
            return Err(Error::invalid(format!(
                "doc {doc_id}: sentence {i} is empty"
            )));
        }
        Ok(AbstractDoc {
            doc_id,
            title: title.into(),
            sentences,
            structured,
        })
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}

/// The retrieval universe: abstracts keyed by document id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    documents: BTreeMap<DocId, AbstractDoc>,
}

impl Corpus {
    pub fn new() -> Corpus {
        Corpus::default()
    }

    pub fn from_documents(docs: impl IntoIterator<Item = AbstractDoc>) -> Result<Corpus> {
        let mut corpus = Corpus::new();
        for doc in docs {
            corpus.insert(doc)?;
        }
        Ok(corpus)
    }

    /// Inserts a document; duplicate doc ids are rejected.
    pub fn insert(&mut self, doc: AbstractDoc) -> Result<()> {
        let id = doc.doc_id;
        if self.documents.insert(id, doc).is_some() {
            return Err(Error::invalid(format!("duplicate doc_id {id}")));
        }
        Ok(())
    }

    pub fn get(&self, doc_id: DocId) -> Option<&AbstractDoc> {
        self.documents.get(&doc_id)
    }

    pub fn contains(&self, doc_id: DocId) -> bool {
        self.documents.contains_key(&doc_id)
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// Documents in ascending doc-id order.
    pub fn iter(&self) -> impl Iterator<Item = &AbstractDoc> {
        self.documents.values()
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = DocId> + '_ {
        self.documents.keys().copied()
    }
}

// ---------------------------------------------------------------------------
// Claims and gold evidence
// ---------------------------------------------------------------------------

/// An atomic factual statement to be checked against the corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Claim {
    pub id: ClaimId,
    pub text: String,
    /// Documents the claim's source citation pointed at; the annotation
    /// universe for this claim.
    pub cited_doc_ids: Vec<DocId>,
}

/// One rationale: a set of sentence indices sufficient to justify the label.
pub type Rationale = BTreeSet<usize>;

/// Gold annotation for one (claim, abstract) pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldEntry {
    /// `Supports` or `Refutes`; never `NotEnoughInfo`.
    pub label: Label,
    /// Mutually exclusive rationales, each non-empty.
    pub rationales: Vec<Rationale>,
}

impl GoldEntry {
    /// Union of all rationale sentence indices.
    pub fn rationale_union(&self) -> BTreeSet<usize> {
        self.rationales.iter().flatten().copied().collect()
    }
}

/// All gold evidence for one claim: abstracts that support or refute it.
/// Cited abstracts absent from `entries` are `NotEnoughInfo`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GoldEvidence {
    pub claim_id: ClaimId,
    pub entries: BTreeMap<DocId, GoldEntry>,
}

impl GoldEvidence {
    pub fn new(claim_id: ClaimId) -> GoldEvidence {
        GoldEvidence {
            claim_id,
            entries: BTreeMap::new(),
        }
    }
}

// ---------------------------------------------------------------------------
// Predictions
// ---------------------------------------------------------------------------

/// Predicted evidence for one (claim, abstract) pair: a flat sentence set
/// plus an optional per-sentence score used by capped evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedEntry {
    /// `Supports` or `Refutes`; `NotEnoughInfo` entries are dropped instead.
    pub label: Label,
    pub sentences: BTreeSet<usize>,
    /// Scores for the predicted sentences, keyed by sentence index.
    pub scores: Option<BTreeMap<usize, f64>>,
}

impl PredictedEntry {
    pub fn new(label: Label, sentences: impl IntoIterator<Item = usize>) -> PredictedEntry {
        PredictedEntry {
            label,
            sentences: sentences.into_iter().collect(),
            scores: None,
        }
    }

    pub fn with_scores(mut self, scores: BTreeMap<usize, f64>) -> PredictedEntry {
        self.scores = Some(scores);
        self
    }
}

/// System output for one claim. An empty entry map means the system found
/// no evidence (every candidate came back `NotEnoughInfo`).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Prediction {
    pub claim_id: ClaimId,
    pub entries: BTreeMap<DocId, PredictedEntry>,
}

impl Prediction {
    pub fn new(claim_id: ClaimId) -> Prediction {
        Prediction {
            claim_id,
            entries: BTreeMap::new(),
        }
    }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// One structural problem found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub claim_id: Option<ClaimId>,
    pub doc_id: Option<DocId>,
    pub message: String,
}

impl Issue {
    fn new(claim_id: Option<ClaimId>, doc_id: Option<DocId>, message: impl Into<String>) -> Issue {
        Issue {
            claim_id,
            doc_id,
            message: message.into(),
        }
    }
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.claim_id, self.doc_id) {
            (Some(c), Some(d)) => write!(f, "claim {c} doc {d}: {}", self.message),
            (Some(c), None) => write!(f, "claim {c}: {}", self.message),
            (None, Some(d)) => write!(f, "doc {d}: {}", self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

/// Outcome of [`validate`]: invariant violations plus non-fatal warnings.
/// Violations are data, not failures; an empty violation list means the
/// dataset is structurally sound.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Issue>,
    pub warnings: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    fn violation(&mut self, claim: Option<ClaimId>, doc: Option<DocId>, msg: impl Into<String>) {
        self.violations.push(Issue::new(claim, doc, msg));
    }

    fn warning(&mut self, claim: Option<ClaimId>, doc: Option<DocId>, msg: impl Into<String>) {
        self.warnings.push(Issue::new(claim, doc, msg));
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "violation\t{v}")?;
        }
        for w in &self.warnings {
            writeln!(f, "warning\t{w}")?;
        }
        write!(
            f,
            "{} violation(s), {} warning(s)",
            self.violations.len(),
            self.warnings.len()
        )
    }
}

/// Rationales longer than this trigger a warning: it is an empirical bound
/// of the annotated data, not a schema rule.
pub const RATIONALE_LENGTH_WARN: usize = 3;

/// Checks every structural invariant of a dataset and reports each breach
/// with the claim, document, and sentence involved.
pub fn validate(corpus: &Corpus, claims: &[Claim], gold: &[GoldEvidence]) -> ValidationReport {
    let mut report = ValidationReport::default();

    for doc in corpus.iter() {
        if doc.sentences.is_empty() {
            report.violation(None, Some(doc.doc_id), "abstract has no sentences");
        }
        for (i, sentence) in doc.sentences.iter().enumerate() {
            if sentence.trim().is_empty() {
                report.violation(None, Some(doc.doc_id), format!("sentence {i} is empty"));
            }
        }
    }

    let mut claim_ids = BTreeSet::new();
    for claim in claims {
        if !claim_ids.insert(claim.id) {
            report.violation(Some(claim.id), None, "duplicate claim id");
        }
        if claim.text.trim().is_empty() {
            report.violation(Some(claim.id), None, "claim text is empty");
        }
        if claim.cited_doc_ids.is_empty() {
            report.warning(Some(claim.id), None, "claim cites no documents");
        }
        for &doc_id in &claim.cited_doc_ids {
            if !corpus.contains(doc_id) {
                report.violation(
                    Some(claim.id),
                    Some(doc_id),
                    "cited document missing from corpus",
                );
            }
        }
    }

    let claims_by_id: BTreeMap<ClaimId, &Claim> = claims.iter().map(|c| (c.id, c)).collect();
    let mut gold_ids = BTreeSet::new();
    for ev in gold {
        if !gold_ids.insert(ev.claim_id) {
            report.violation(Some(ev.claim_id), None, "duplicate gold evidence record");
        }
        let claim = claims_by_id.get(&ev.claim_id).copied();
        if claim.is_none() {
            report.violation(Some(ev.claim_id), None, "gold evidence for unknown claim");
        }
        for (&doc_id, entry) in &ev.entries {
            if entry.label == Label::NotEnoughInfo {
                report.violation(
                    Some(ev.claim_id),
                    Some(doc_id),
                    "NOT_ENOUGH_INFO is encoded by absence, not as an evidence label",
                );
            }
            if let Some(claim) = claim {
                if !claim.cited_doc_ids.contains(&doc_id) {
                    report.violation(
                        Some(ev.claim_id),
                        Some(doc_id),
                        "evidence document not among the claim's cited documents",
                    );
                }
            }
            let doc_len = match corpus.get(doc_id) {
                Some(doc) => doc.len(),
                None => {
                    report.violation(
                        Some(ev.claim_id),
                        Some(doc_id),
                        "evidence document missing from corpus",
                    );
                    continue;
                }
            };
            let mut seen: BTreeMap<usize, usize> = BTreeMap::new();
            for (r_idx, rationale) in entry.rationales.iter().enumerate() {
                if rationale.is_empty() {
                    report.violation(
                        Some(ev.claim_id),
                        Some(doc_id),
                        format!("rationale {r_idx} is empty"),
                    );
                }
                if rationale.len() > RATIONALE_LENGTH_WARN {
                    report.warning(
                        Some(ev.claim_id),
                        Some(doc_id),
                        format!(
                            "rationale length {} exceeds {RATIONALE_LENGTH_WARN}",
                            rationale.len()
                        ),
                    );
                }
                for &s in rationale {
                    if s >= doc_len {
                        report.violation(
                            Some(ev.claim_id),
                            Some(doc_id),
                            format!("rationale sentence {s} out of range (abstract has {doc_len})"),
                        );
                    }
                    if let Some(&other) = seen.get(&s) {
                        report.violation(
                            Some(ev.claim_id),
                            Some(doc_id),
                            format!("rationales {other} and {r_idx} overlap at sentence {s}"),
                        );
                    } else {
                        seen.insert(s, r_idx);
                    }
                }
            }
        }
    }

    report
}

/// Checks predictions against the corpus: in-range, duplicate-free claim
/// ids, no NEI entries. Used by loaders and by the evaluators.
pub fn validate_predictions(corpus: &Corpus, preds: &[Prediction]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for pred in preds {
        if !seen.insert(pred.claim_id) {
            return Err(Error::invalid(format!(
                "duplicate prediction for claim {}",
                pred.claim_id
            )));
        }
        for (&doc_id, entry) in &pred.entries {
            if entry.label == Label::NotEnoughInfo {
                return Err(Error::invalid(format!(
                    "claim {} doc {doc_id}: NOT_ENOUGH_INFO entries must be omitted",
                    pred.claim_id
                )));
            }
            let doc = corpus.get(doc_id).ok_or_else(|| {
                Error::invalid(format!(
                    "claim {} predicts doc {doc_id} absent from corpus",
                    pred.claim_id
                ))
            })?;
            for &s in &entry.sentences {
                if s >= doc.len() {
                    return Err(Error::invalid(format!(
                        "claim {} doc {doc_id}: sentence {s} out of range (abstract has {})",
                        pred.claim_id,
                        doc.len()
                    )));
                }
            }
        }
    }
    Ok(())
}
