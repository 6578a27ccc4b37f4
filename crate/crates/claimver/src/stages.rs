//! Rationale-selection and label-prediction stages behind two uniform
//! contracts: diagnostic baselines, external-score adapters, and the gold
//! oracles used for ablation.
//!
//! Gold annotations are injected at construction time and only into oracle
//! stages, so no non-oracle stage can depend on them. All stages are
//! immutable after construction and callable concurrently.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::PathBuf;
use std::sync::Arc;

use crate::data::{AbstractDoc, Claim, ClaimId, DocId, GoldEvidence, Label};
use crate::error::{Error, Result};
use crate::io::{LabelProbs, SentenceScores};
use crate::retrieval::TfIdfIndex;

pub const DEFAULT_THRESHOLD: f64 = 0.5;
/// Documented presets for externally trained scorers tuned on other corpora.
pub const PRESET_THRESHOLD_LOW: f64 = 0.025;
pub const PRESET_THRESHOLD_HIGH: f64 = 0.75;

// ---------------------------------------------------------------------------
// Selection primitives
// ---------------------------------------------------------------------------

pub type SentenceSet = BTreeSet<usize>;

/// Sentences at or above the threshold: `{i : scores[i] >= t}`.
pub fn select_threshold(scores: &[f64], t: f64) -> SentenceSet {
    scores
        .iter()
        .enumerate()
        .filter(|(_, &s)| s >= t)
        .map(|(i, _)| i)
        .collect()
}

/// Indices of the `k` highest scores, ties broken by ascending index;
/// fewer when the abstract is shorter than `k`.
pub fn select_topk_sentences(scores: &[f64], k: usize) -> SentenceSet {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    order.into_iter().collect()
}

pub fn select_first_sentence(doc: &AbstractDoc) -> SentenceSet {
    debug_assert!(!doc.is_empty());
    [0].into_iter().collect()
}

pub fn select_last_sentence(doc: &AbstractDoc) -> SentenceSet {
    debug_assert!(!doc.is_empty());
    [doc.len() - 1].into_iter().collect()
}

/// Union of all gold rationale sentences for `(claim, doc)`; empty for
/// non-evidence abstracts.
pub fn oracle_select(gold: &GoldEvidence, doc_id: DocId) -> SentenceSet {
    gold.entries
        .get(&doc_id)
        .map(|entry| entry.rationale_union())
        .unwrap_or_default()
}

/// The gold label iff the selection covers at least one full gold
/// rationale; `NotEnoughInfo` otherwise and for non-evidence abstracts.
pub fn oracle_label(gold: &GoldEvidence, doc_id: DocId, selected: &SentenceSet) -> Label {
    match gold.entries.get(&doc_id) {
        Some(entry)
            if entry
                .rationales
                .iter()
                .any(|r| !r.is_empty() && r.is_subset(selected)) =>
        {
            entry.label
        }
        _ => Label::NotEnoughInfo,
    }
}

/// Argmax over the label distribution, ties broken by the fixed order
/// SUPPORTS > REFUTES > NOT_ENOUGH_INFO; an empty selection is always
/// `NotEnoughInfo`.
pub fn predict_from_probs(probs: &LabelProbs, selected: &SentenceSet) -> Label {
    if selected.is_empty() {
        return Label::NotEnoughInfo;
    }
    let mut best = Label::Supports;
    for label in [Label::Refutes, Label::NotEnoughInfo] {
        if probs.get(label) > probs.get(best) {
            best = label;
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Stage contracts
// ---------------------------------------------------------------------------

/// A rationale selection for one (claim, abstract) pair: the sentence set,
/// plus scores for those sentences when the selector computed any.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Selection {
    pub sentences: SentenceSet,
    pub scores: Option<BTreeMap<usize, f64>>,
}

impl Selection {
    pub fn unscored(sentences: SentenceSet) -> Selection {
        Selection {
            sentences,
            scores: None,
        }
    }

    fn scored(sentences: SentenceSet, all_scores: &[f64]) -> Selection {
        let scores = sentences.iter().map(|&i| (i, all_scores[i])).collect();
        Selection {
            sentences,
            scores: Some(scores),
        }
    }
}

/// Identifies rationale sentences for one candidate abstract. Returned
/// indices are in-range and duplicate-free.
pub trait RationaleSelector: Send + Sync {
    fn select(&self, claim: &Claim, doc: &AbstractDoc) -> Selection;
}

/// Predicts the label for one candidate abstract given the selected
/// rationale sentences.
pub trait LabelPredictor: Send + Sync {
    /// Called only with a non-empty selection.
    fn predict_evidence(&self, claim: &Claim, doc: &AbstractDoc, selected: &SentenceSet) -> Label;

    /// An abstract with no rationale sentences is `NotEnoughInfo` for every
    /// predictor; implementations only see non-empty selections.
    fn predict(&self, claim: &Claim, doc: &AbstractDoc, selected: &SentenceSet) -> Label {
        if selected.is_empty() {
            Label::NotEnoughInfo
        } else {
            self.predict_evidence(claim, doc, selected)
        }
    }
}

// ---------------------------------------------------------------------------
// Score-driven selection
// ---------------------------------------------------------------------------

/// Decision rule applied to per-sentence scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SelectionRule {
    Threshold(f64),
    TopK(usize),
}

impl SelectionRule {
    fn apply(&self, scores: &[f64]) -> SentenceSet {
        match *self {
            SelectionRule::Threshold(t) => select_threshold(scores, t),
            SelectionRule::TopK(k) => select_topk_sentences(scores, k),
        }
    }
}

pub struct FirstSentenceSelector;

impl RationaleSelector for FirstSentenceSelector {
    fn select(&self, _claim: &Claim, doc: &AbstractDoc) -> Selection {
        Selection::unscored(select_first_sentence(doc))
    }
}

pub struct LastSentenceSelector;

impl RationaleSelector for LastSentenceSelector {
    fn select(&self, _claim: &Claim, doc: &AbstractDoc) -> Selection {
        Selection::unscored(select_last_sentence(doc))
    }
}

/// Scores sentences by TF-IDF similarity to the claim, then applies a
/// threshold or top-k rule.
pub struct TfIdfSelector {
    index: Arc<TfIdfIndex>,
    rule: SelectionRule,
}

impl TfIdfSelector {
    pub fn new(index: Arc<TfIdfIndex>, rule: SelectionRule) -> TfIdfSelector {
        TfIdfSelector { index, rule }
    }
}

impl RationaleSelector for TfIdfSelector {
    fn select(&self, claim: &Claim, doc: &AbstractDoc) -> Selection {
        let scores = self.index.rank_sentences(&claim.text, doc);
        Selection::scored(self.rule.apply(&scores), &scores)
    }
}

/// Applies a threshold or top-k rule to externally supplied sentence
/// scores. Pairs missing from the score file degrade to all-zero scores
/// with a warning rather than failing the run.
pub struct ExternalScoreSelector {
    scores: HashMap<(ClaimId, DocId), Vec<f64>>,
    rule: SelectionRule,
}

impl ExternalScoreSelector {
    pub fn new(scores: Vec<SentenceScores>, rule: SelectionRule) -> ExternalScoreSelector {
        ExternalScoreSelector {
            scores: scores
                .into_iter()
                .map(|s| ((s.claim_id, s.doc_id), s.scores))
                .collect(),
            rule,
        }
    }
}

impl RationaleSelector for ExternalScoreSelector {
    fn select(&self, claim: &Claim, doc: &AbstractDoc) -> Selection {
        match self.scores.get(&(claim.id, doc.doc_id)) {
            Some(scores) => Selection::scored(self.rule.apply(scores), scores),
            None => {
                log::warn!(
                    "no sentence scores for claim {} doc {}; treating as all zeros",
                    claim.id,
                    doc.doc_id
                );
                let zeros = vec![0.0; doc.len()];
                Selection::scored(self.rule.apply(&zeros), &zeros)
            }
        }
    }
}

/// Returns the union of all gold rationales; empty for non-evidence pairs.
pub struct OracleSelector {
    gold: Arc<HashMap<ClaimId, GoldEvidence>>,
}

impl OracleSelector {
    pub fn new(gold: &[GoldEvidence]) -> OracleSelector {
        OracleSelector {
            gold: Arc::new(gold.iter().map(|g| (g.claim_id, g.clone())).collect()),
        }
    }
}

impl RationaleSelector for OracleSelector {
    fn select(&self, claim: &Claim, doc: &AbstractDoc) -> Selection {
        let sentences = self
            .gold
            .get(&claim.id)
            .map(|g| oracle_select(g, doc.doc_id))
            .unwrap_or_default();
        Selection::unscored(sentences)
    }
}

// ---------------------------------------------------------------------------
// Label predictors
// ---------------------------------------------------------------------------

/// Predicts the gold label whenever the selection covers at least one full
/// gold rationale.
pub struct OracleLabeler {
    gold: Arc<HashMap<ClaimId, GoldEvidence>>,
}

impl OracleLabeler {
    pub fn new(gold: &[GoldEvidence]) -> OracleLabeler {
        OracleLabeler {
            gold: Arc::new(gold.iter().map(|g| (g.claim_id, g.clone())).collect()),
        }
    }
}

impl LabelPredictor for OracleLabeler {
    fn predict_evidence(&self, claim: &Claim, doc: &AbstractDoc, selected: &SentenceSet) -> Label {
        self.gold
            .get(&claim.id)
            .map(|g| oracle_label(g, doc.doc_id, selected))
            .unwrap_or(Label::NotEnoughInfo)
    }
}

/// Argmax over externally supplied label distributions. Pairs missing from
/// the probability file degrade to `NotEnoughInfo` with a warning.
pub struct ExternalProbsLabeler {
    probs: HashMap<(ClaimId, DocId), LabelProbs>,
}

impl ExternalProbsLabeler {
    pub fn new(probs: Vec<LabelProbs>) -> ExternalProbsLabeler {
        ExternalProbsLabeler {
            probs: probs
                .into_iter()
                .map(|p| ((p.claim_id, p.doc_id), p))
                .collect(),
        }
    }
}

impl LabelPredictor for ExternalProbsLabeler {
    fn predict_evidence(&self, claim: &Claim, doc: &AbstractDoc, selected: &SentenceSet) -> Label {
        match self.probs.get(&(claim.id, doc.doc_id)) {
            Some(probs) => predict_from_probs(probs, selected),
            None => {
                log::warn!(
                    "no label probabilities for claim {} doc {}; predicting NOT_ENOUGH_INFO",
                    claim.id,
                    doc.doc_id
                );
                Label::NotEnoughInfo
            }
        }
    }
}

/// Always predicts one fixed label (majority-class style diagnostic).
pub struct FixedLabeler(pub Label);

impl LabelPredictor for FixedLabeler {
    fn predict_evidence(&self, _claim: &Claim, _doc: &AbstractDoc, _selected: &SentenceSet) -> Label {
        self.0
    }
}

// ---------------------------------------------------------------------------
// Stage specs (CLI-facing)
// ---------------------------------------------------------------------------

/// Parsed `--selector` flag.
#[derive(Debug, Clone, PartialEq)]
pub enum SelectorSpec {
    Oracle,
    /// Threshold rule over a score file supplied separately (`--scores`).
    Threshold(f64),
    /// Top-k rule over a score file supplied separately (`--scores`).
    TopK(usize),
    TfIdfThreshold(f64),
    TfIdfTopK(usize),
    First,
    Last,
    /// Score file named inline; selects with the default 0.5 threshold.
    External(PathBuf),
}

impl SelectorSpec {
    pub fn requires_gold(&self) -> bool {
        matches!(self, SelectorSpec::Oracle)
    }

    pub fn requires_index(&self) -> bool {
        matches!(self, SelectorSpec::TfIdfThreshold(_) | SelectorSpec::TfIdfTopK(_))
    }

    /// Whether this selector needs a score file passed via `--scores`.
    pub fn requires_score_file(&self) -> bool {
        matches!(self, SelectorSpec::Threshold(_) | SelectorSpec::TopK(_))
    }
}

fn parse_threshold(value: &str, flag: &str) -> Result<f64> {
    let t: f64 = value
        .parse()
        .map_err(|_| Error::usage(format!("{flag}: bad threshold {value:?}")))?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::usage(format!(
            "{flag}: threshold must be within [0, 1], got {t}"
        )));
    }
    Ok(t)
}

fn parse_k(value: &str, flag: &str) -> Result<usize> {
    let k: usize = value
        .parse()
        .map_err(|_| Error::usage(format!("{flag}: bad k {value:?}")))?;
    if k == 0 {
        return Err(Error::usage(format!("{flag}: k must be at least 1")));
    }
    Ok(k)
}

impl std::str::FromStr for SelectorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<SelectorSpec> {
        let (name, arg) = match s.split_once(':') {
            Some((name, arg)) => (name, Some(arg)),
            None => (s, None),
        };
        match (name, arg) {
            ("oracle", None) => Ok(SelectorSpec::Oracle),
            ("first", None) => Ok(SelectorSpec::First),
            ("last", None) => Ok(SelectorSpec::Last),
            ("threshold", Some(t)) => Ok(SelectorSpec::Threshold(parse_threshold(t, "threshold")?)),
            ("topk", Some(k)) => Ok(SelectorSpec::TopK(parse_k(k, "topk")?)),
            ("tfidf-threshold", Some(t)) => {
                Ok(SelectorSpec::TfIdfThreshold(parse_threshold(t, "tfidf-threshold")?))
            }
            ("tfidf-topk", Some(k)) => Ok(SelectorSpec::TfIdfTopK(parse_k(k, "tfidf-topk")?)),
            ("external", Some(path)) if !path.is_empty() => {
                Ok(SelectorSpec::External(PathBuf::from(path)))
            }
            _ => Err(Error::usage(format!("unknown selector spec {s:?}"))),
        }
    }
}

/// Parsed `--labeler` flag.
#[derive(Debug, Clone, PartialEq)]
pub enum LabelerSpec {
    Oracle,
    External(PathBuf),
    Always(Label),
}

impl LabelerSpec {
    pub fn requires_gold(&self) -> bool {
        matches!(self, LabelerSpec::Oracle)
    }
}

impl std::str::FromStr for LabelerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<LabelerSpec> {
        match s.split_once(':') {
            None if s == "oracle" => Ok(LabelerSpec::Oracle),
            Some(("external", path)) if !path.is_empty() => {
                Ok(LabelerSpec::External(PathBuf::from(path)))
            }
            Some(("always", token)) => Ok(LabelerSpec::Always(
                Label::parse(token).map_err(|e| Error::usage(e.to_string()))?,
            )),
            _ => Err(Error::usage(format!("unknown labeler spec {s:?}"))),
        }
    }
}
