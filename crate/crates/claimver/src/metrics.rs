//! Two-level evaluation of predicted evidence, module-level diagnostics,
//! and dataset statistics.
//!
//! Abstract level: a predicted abstract is correctly identified iff it is a
//! gold evidence abstract, its label matches, its predicted sentences
//! contain at least one full gold rationale, and it respects the sentence
//! cap. Sentence level: a predicted sentence counts iff the abstract is
//! correctly labeled, the sentence belongs to a gold rationale, and every
//! other member of that rationale was also predicted; no cap applies.
//!
//! Tallies are integer numerators and denominators, so reductions are
//! exact and order-insensitive.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::data::{ClaimId, Corpus, DocId, GoldEvidence, Label, Prediction};
use crate::error::{Error, Result};
use crate::stages::SentenceSet;

pub const DEFAULT_CAP: usize = 3;

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Abstract,
    Sentence,
    Diagnostic,
}

impl Level {
    pub fn as_str(&self) -> &'static str {
        match self {
            Level::Abstract => "abstract",
            Level::Sentence => "sentence",
            Level::Diagnostic => "diagnostic",
        }
    }
}

/// Micro-averaged precision/recall/F1 with the exact integer tallies they
/// came from. A zero denominator is reported as 0 and stays visible through
/// the stored denominator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub level: Level,
    /// Correct predictions; numerator of both precision and recall.
    pub num: u64,
    pub precision_den: u64,
    pub recall_den: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl MetricReport {
    pub fn from_counts(level: Level, num: u64, precision_den: u64, recall_den: u64) -> MetricReport {
        let ratio = |den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(precision_den);
        let recall = ratio(recall_den);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        MetricReport {
            level,
            num,
            precision_den,
            recall_den,
            precision,
            recall,
            f1,
        }
    }
}

/// Renders a [0, 1] ratio as a percentage with one decimal, e.g. `81.3`.
pub fn percent(value: f64) -> String {
    format!("{:.1}", value * 100.0)
}

// ---------------------------------------------------------------------------
// Sentence cap policy
// ---------------------------------------------------------------------------

/// How the abstract-level evaluation applies the predicted-sentence cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CapPolicy {
    /// Entries with more than `cap` sentences are counted incorrect.
    Strict(usize),
    /// Entries are reduced to their `cap` highest-scored sentences
    /// (requires per-sentence scores; ties by ascending index).
    Truncate(usize),
    /// No cap.
    Off,
}

impl Default for CapPolicy {
    fn default() -> CapPolicy {
        CapPolicy::Strict(DEFAULT_CAP)
    }
}

enum Effective<'a> {
    Disqualified,
    AsIs(&'a SentenceSet),
    Reduced(SentenceSet),
}

impl CapPolicy {
    fn effective<'a>(
        &self,
        claim_id: ClaimId,
        doc_id: DocId,
        entry: &'a crate::data::PredictedEntry,
    ) -> Result<Effective<'a>> {
        match *self {
            CapPolicy::Off => Ok(Effective::AsIs(&entry.sentences)),
            CapPolicy::Strict(cap) => {
                if entry.sentences.len() > cap {
                    Ok(Effective::Disqualified)
                } else {
                    Ok(Effective::AsIs(&entry.sentences))
                }
            }
            CapPolicy::Truncate(cap) => {
                if entry.sentences.len() <= cap {
                    return Ok(Effective::AsIs(&entry.sentences));
                }
                let scores = entry.scores.as_ref().ok_or_else(|| {
                    Error::invalid(format!(
                        "claim {claim_id} doc {doc_id}: truncate cap requires per-sentence scores"
                    ))
                })?;
                let mut order: Vec<usize> = entry.sentences.iter().copied().collect();
                for &s in &order {
                    if !scores.contains_key(&s) {
                        return Err(Error::invalid(format!(
                            "claim {claim_id} doc {doc_id}: sentence {s} has no score for truncation"
                        )));
                    }
                }
                order.sort_by(|&a, &b| scores[&b].total_cmp(&scores[&a]).then(a.cmp(&b)));
                order.truncate(cap);
                Ok(Effective::Reduced(order.into_iter().collect()))
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Task evaluation
// ---------------------------------------------------------------------------

fn gold_by_claim(gold: &[GoldEvidence]) -> Result<HashMap<ClaimId, &GoldEvidence>> {
    let mut map = HashMap::with_capacity(gold.len());
    for ev in gold {
        if map.insert(ev.claim_id, ev).is_some() {
            return Err(Error::invalid(format!(
                "duplicate gold evidence record for claim {}",
                ev.claim_id
            )));
        }
    }
    Ok(map)
}

/// Correctly-identified evidence abstracts, micro-averaged over all claims.
pub fn evaluate_abstract_level(
    gold: &[GoldEvidence],
    preds: &[Prediction],
    corpus: &Corpus,
    cap: CapPolicy,
) -> Result<MetricReport> {
    crate::data::validate_predictions(corpus, preds)?;
    if let CapPolicy::Truncate(limit) = cap {
        // Every over-cap entry needs scores, whether or not it ends up
        // gold-matched; the error must not depend on gold contents.
        for pred in preds {
            for (&doc_id, entry) in &pred.entries {
                if entry.sentences.len() > limit {
                    cap.effective(pred.claim_id, doc_id, entry)?;
                }
            }
        }
    }
    let gold_map = gold_by_claim(gold)?;

    let mut predicted = 0u64;
    let mut correct = 0u64;
    for pred in preds {
        let gold_entry = gold_map.get(&pred.claim_id);
        for (&doc_id, entry) in &pred.entries {
            predicted += 1;
            let Some(g) = gold_entry.and_then(|ev| ev.entries.get(&doc_id)) else {
                continue;
            };
            if g.label != entry.label {
                continue;
            }
            let effective = cap.effective(pred.claim_id, doc_id, entry)?;
            let sentences: &SentenceSet = match &effective {
                Effective::Disqualified => continue,
                Effective::AsIs(s) => s,
                Effective::Reduced(s) => s,
            };
            if g.rationales
                .iter()
                .any(|r| !r.is_empty() && r.is_subset(sentences))
            {
                correct += 1;
            }
        }
    }
    let gold_total: u64 = gold.iter().map(|ev| ev.entries.len() as u64).sum();
    Ok(MetricReport::from_counts(
        Level::Abstract,
        correct,
        predicted,
        gold_total,
    ))
}

/// Correctly-identified rationale sentences, micro-averaged over all
/// claims. No cap: over-prediction is penalized by the precision
/// denominator instead.
pub fn evaluate_sentence_level(
    gold: &[GoldEvidence],
    preds: &[Prediction],
    corpus: &Corpus,
) -> Result<MetricReport> {
    crate::data::validate_predictions(corpus, preds)?;
    let gold_map = gold_by_claim(gold)?;

    let mut predicted = 0u64;
    let mut correct = 0u64;
    for pred in preds {
        let gold_entry = gold_map.get(&pred.claim_id);
        for (&doc_id, entry) in &pred.entries {
            predicted += entry.sentences.len() as u64;
            let Some(g) = gold_entry.and_then(|ev| ev.entries.get(&doc_id)) else {
                continue;
            };
            if g.label != entry.label {
                continue;
            }
            let mut hit: BTreeSet<usize> = BTreeSet::new();
            for rationale in &g.rationales {
                if !rationale.is_empty() && rationale.is_subset(&entry.sentences) {
                    hit.extend(rationale.iter().copied());
                }
            }
            correct += hit.len() as u64;
        }
    }
    let gold_total: u64 = gold
        .iter()
        .flat_map(|ev| ev.entries.values())
        .flat_map(|entry| entry.rationales.iter())
        .map(|r| r.len() as u64)
        .sum();
    Ok(MetricReport::from_counts(
        Level::Sentence,
        correct,
        predicted,
        gold_total,
    ))
}

// ---------------------------------------------------------------------------
// Module-level diagnostics
// ---------------------------------------------------------------------------

/// One selector run on a (claim, abstract) pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectorOutput {
    pub claim_id: ClaimId,
    pub doc_id: DocId,
    pub selected: SentenceSet,
}

/// Selector quality in isolation, given gold abstracts: a selected sentence
/// is a hit iff it belongs to the union of that abstract's gold rationales.
/// Membership semantics, not the full-rationale credit of the task metric.
/// Recall is measured against every gold evidence abstract, whether or not
/// the selector produced output for it.
pub fn diagnostic_selection_prf(gold: &[GoldEvidence], outputs: &[SelectorOutput]) -> MetricReport {
    let mut unions: HashMap<(ClaimId, DocId), BTreeSet<usize>> = HashMap::new();
    let mut recall_den = 0u64;
    for ev in gold {
        for (&doc_id, entry) in &ev.entries {
            let union = entry.rationale_union();
            recall_den += union.len() as u64;
            unions.insert((ev.claim_id, doc_id), union);
        }
    }

    let mut selected_total = 0u64;
    let mut hits = 0u64;
    for output in outputs {
        selected_total += output.selected.len() as u64;
        if let Some(union) = unions.get(&(output.claim_id, output.doc_id)) {
            hits += output.selected.intersection(union).count() as u64;
        }
    }
    MetricReport::from_counts(Level::Diagnostic, hits, selected_total, recall_den)
}

/// One labeler run on a (claim, cited-abstract) pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelerOutput {
    pub claim_id: ClaimId,
    pub doc_id: DocId,
    pub predicted: Label,
}

/// Labeler quality given gold rationales: accuracy, gold-by-predicted
/// confusion counts, and macro-F1 over the three labels. The gold label of
/// a cited abstract without an evidence entry is `NotEnoughInfo`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelDiagnostics {
    pub accuracy: f64,
    pub total: u64,
    /// Rows: gold label. Columns: predicted label. Order per [`Label::ALL`].
    pub confusion: [[u64; 3]; 3],
    pub macro_f1: f64,
}

fn label_index(label: Label) -> usize {
    match label {
        Label::Supports => 0,
        Label::Refutes => 1,
        Label::NotEnoughInfo => 2,
    }
}

pub fn diagnostic_label_accuracy(
    gold: &[GoldEvidence],
    outputs: &[LabelerOutput],
) -> LabelDiagnostics {
    let mut gold_labels: HashMap<(ClaimId, DocId), Label> = HashMap::new();
    for ev in gold {
        for (&doc_id, entry) in &ev.entries {
            gold_labels.insert((ev.claim_id, doc_id), entry.label);
        }
    }

    let mut confusion = [[0u64; 3]; 3];
    for output in outputs {
        let gold_label = gold_labels
            .get(&(output.claim_id, output.doc_id))
            .copied()
            .unwrap_or(Label::NotEnoughInfo);
        confusion[label_index(gold_label)][label_index(output.predicted)] += 1;
    }

    let total: u64 = confusion.iter().flatten().sum();
    let correct: u64 = (0..3).map(|i| confusion[i][i]).sum();
    let accuracy = if total == 0 {
        0.0
    } else {
        correct as f64 / total as f64
    };

    let mut f1_sum = 0.0;
    for (i, row) in confusion.iter().enumerate() {
        let tp = row[i] as f64;
        let gold_count: u64 = row.iter().sum();
        let pred_count: u64 = confusion.iter().map(|r| r[i]).sum();
        let precision = if pred_count == 0 { 0.0 } else { tp / pred_count as f64 };
        let recall = if gold_count == 0 { 0.0 } else { tp / gold_count as f64 };
        if precision + recall > 0.0 {
            f1_sum += 2.0 * precision * recall / (precision + recall);
        }
    }

    LabelDiagnostics {
        accuracy,
        total,
        confusion,
        macro_f1: f1_sum / 3.0,
    }
}

// ---------------------------------------------------------------------------
// Dataset statistics
// ---------------------------------------------------------------------------

/// Summary statistics over one split of the dataset, grouped by the
/// structured-abstract flag where the reference tables do.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsReport {
    pub n_claims: usize,
    pub n_corpus_docs: usize,
    /// Claims without a gold record (e.g. a blind test split).
    pub n_unlabeled_claims: usize,
    /// Claims by their evidence label; NEI when the gold record is empty.
    pub claim_labels: BTreeMap<Label, usize>,
    /// (claim, cited-abstract) pairs by label, for claims with gold records.
    pub pair_labels: BTreeMap<Label, usize>,
    /// Indexed by the structured flag: `[unstructured, structured]`.
    pub by_structure: [StructureStats; 2],
    /// Evidence abstracts per claim (0 for NEI claims with gold records).
    pub evidence_docs_per_claim: BTreeMap<usize, usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StructureStats {
    pub structured: bool,
    /// Distinct evidence abstracts.
    pub evidence_abstracts: usize,
    /// Median length in sentences over distinct evidence abstracts.
    pub abstract_length_median: Option<f64>,
    /// Mean rationale count over (claim, abstract) evidence pairs.
    pub rationale_count_mean: Option<f64>,
    /// Median fraction of the abstract covered by rationale sentences,
    /// over (claim, abstract) evidence pairs.
    pub rationale_fraction_median: Option<f64>,
    /// Rationales per evidence pair.
    pub rationales_per_abstract: BTreeMap<usize, usize>,
    /// Sentences per rationale.
    pub sentences_per_rationale: BTreeMap<usize, usize>,
}

fn median(sorted: &[f64]) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let mid = sorted.len() / 2;
    Some(if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    })
}

/// Claim-level label: NEI for an empty gold record, otherwise the majority
/// label over the claim's evidence entries (ties resolved as SUPPORTS).
fn claim_level_label(ev: &GoldEvidence) -> Label {
    let supports = ev
        .entries
        .values()
        .filter(|e| e.label == Label::Supports)
        .count();
    let refutes = ev.entries.len() - supports;
    if ev.entries.is_empty() {
        Label::NotEnoughInfo
    } else if supports >= refutes {
        Label::Supports
    } else {
        Label::Refutes
    }
}

pub fn dataset_stats(
    corpus: &Corpus,
    claims: &[crate::data::Claim],
    gold: &[GoldEvidence],
) -> Result<StatsReport> {
    let gold_map = gold_by_claim(gold)?;

    let mut claim_labels: BTreeMap<Label, usize> = BTreeMap::new();
    let mut pair_labels: BTreeMap<Label, usize> = BTreeMap::new();
    let mut evidence_docs_per_claim: BTreeMap<usize, usize> = BTreeMap::new();
    let mut n_unlabeled = 0usize;

    // Per-structure accumulators over evidence pairs and distinct docs.
    let mut distinct_docs: [BTreeSet<DocId>; 2] = [BTreeSet::new(), BTreeSet::new()];
    let mut rationale_counts: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    let mut fractions: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    let mut rationales_hist: [BTreeMap<usize, usize>; 2] = [BTreeMap::new(), BTreeMap::new()];
    let mut sentences_hist: [BTreeMap<usize, usize>; 2] = [BTreeMap::new(), BTreeMap::new()];

    for claim in claims {
        let Some(ev) = gold_map.get(&claim.id) else {
            n_unlabeled += 1;
            continue;
        };
        *claim_labels.entry(claim_level_label(ev)).or_insert(0) += 1;
        *evidence_docs_per_claim.entry(ev.entries.len()).or_insert(0) += 1;

        let nei_pairs = claim
            .cited_doc_ids
            .iter()
            .filter(|d| !ev.entries.contains_key(d))
            .count();
        if nei_pairs > 0 {
            *pair_labels.entry(Label::NotEnoughInfo).or_insert(0) += nei_pairs;
        }

        for (&doc_id, entry) in &ev.entries {
            *pair_labels.entry(entry.label).or_insert(0) += 1;
            let doc = corpus.get(doc_id).ok_or_else(|| {
                Error::invalid(format!(
                    "claim {} evidence doc {doc_id} absent from corpus",
                    claim.id
                ))
            })?;
            let group = doc.structured as usize;
            distinct_docs[group].insert(doc_id);
            rationale_counts[group].push(entry.rationales.len() as f64);
            let union = entry.rationale_union();
            fractions[group].push(union.len() as f64 / doc.len() as f64);
            *rationales_hist[group]
                .entry(entry.rationales.len())
                .or_insert(0) += 1;
            for rationale in &entry.rationales {
                *sentences_hist[group].entry(rationale.len()).or_insert(0) += 1;
            }
        }
    }

    let by_structure = [0usize, 1].map(|group| {
        let lengths: Vec<f64> = distinct_docs[group]
            .iter()
            .map(|&d| corpus.get(d).map(|doc| doc.len() as f64).unwrap_or(0.0))
            .collect();
        let mut fracs = fractions[group].clone();
        fracs.sort_by(f64::total_cmp);
        let counts = &rationale_counts[group];
        StructureStats {
            structured: group == 1,
            evidence_abstracts: distinct_docs[group].len(),
            abstract_length_median: median(&lengths),
            rationale_count_mean: if counts.is_empty() {
                None
            } else {
                Some(counts.iter().sum::<f64>() / counts.len() as f64)
            },
            rationale_fraction_median: median(&fracs),
            rationales_per_abstract: rationales_hist[group].clone(),
            sentences_per_rationale: sentences_hist[group].clone(),
        }
    });

    Ok(StatsReport {
        n_claims: claims.len(),
        n_corpus_docs: corpus.len(),
        n_unlabeled_claims: n_unlabeled,
        claim_labels,
        pair_labels,
        by_structure,
        evidence_docs_per_claim,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{AbstractDoc, Claim, GoldEntry, PredictedEntry};

    fn corpus() -> Corpus {
        let mk = |id: DocId, n: usize, structured: bool| {
            AbstractDoc::new(
                id,
                format!("t{id}"),
                (0..n).map(|i| format!("s{i}")).collect(),
                structured,
            )
            .unwrap()
        };
        Corpus::from_documents([mk(11, 10, false), mk(12, 6, false), mk(13, 4, true)]).unwrap()
    }

    /// Gold: claim 1 -> doc 11 (SUPPORTS, rationales {2,5} and {7}).
    fn gold() -> Vec<GoldEvidence> {
        let mut ev = GoldEvidence::new(1);
        ev.entries.insert(
            11,
            GoldEntry {
                label: Label::Supports,
                rationales: vec![[2, 5].into(), [7].into()],
            },
        );
        vec![ev]
    }

    fn pred(entries: &[(DocId, Label, &[usize])]) -> Vec<Prediction> {
        let mut p = Prediction::new(1);
        for (doc_id, label, sentences) in entries {
            p.entries
                .insert(*doc_id, PredictedEntry::new(*label, sentences.iter().copied()));
        }
        vec![p]
    }

    #[test]
    fn abstract_level_all_conditions_met() {
        let report = evaluate_abstract_level(
            &gold(),
            &pred(&[(11, Label::Supports, &[7])]),
            &corpus(),
            CapPolicy::default(),
        )
        .unwrap();
        assert_eq!((report.num, report.precision_den, report.recall_den), (1, 1, 1));
        assert_eq!((report.precision, report.recall, report.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn abstract_level_extra_non_evidence_doc() {
        // P = 1/2, R = 1/1, F1 = 2/3 exactly.
        let report = evaluate_abstract_level(
            &gold(),
            &pred(&[(11, Label::Supports, &[7]), (12, Label::Supports, &[0])]),
            &corpus(),
            CapPolicy::default(),
        )
        .unwrap();
        assert_eq!((report.num, report.precision_den, report.recall_den), (1, 2, 1));
        assert_eq!(report.precision, 0.5);
        assert_eq!(report.recall, 1.0);
        assert_eq!(report.f1, 2.0 / 3.0);
    }

    #[test]
    fn abstract_level_partial_rationale_fails() {
        let report = evaluate_abstract_level(
            &gold(),
            &pred(&[(11, Label::Supports, &[2])]),
            &corpus(),
            CapPolicy::default(),
        )
        .unwrap();
        assert_eq!(report.num, 0);
        assert_eq!(report.precision, 0.0);
        assert_eq!(report.recall, 0.0);
        assert_eq!(report.f1, 0.0);
    }

    #[test]
    fn abstract_level_strict_cap_disqualifies() {
        let preds = pred(&[(11, Label::Supports, &[2, 5, 7, 9])]);
        let strict = evaluate_abstract_level(&gold(), &preds, &corpus(), CapPolicy::Strict(3)).unwrap();
        assert_eq!(strict.num, 0);
        let off = evaluate_abstract_level(&gold(), &preds, &corpus(), CapPolicy::Off).unwrap();
        assert_eq!(off.num, 1);
    }

    #[test]
    fn abstract_level_truncate_keeps_top_scored() {
        let mut p = Prediction::new(1);
        p.entries.insert(
            11,
            PredictedEntry::new(Label::Supports, [2, 5, 7, 9]).with_scores(
                [(2, 0.9), (5, 0.8), (7, 0.7), (9, 0.1)].into_iter().collect(),
            ),
        );
        // Top 3 by score = {2, 5, 7}: both rationales survive truncation.
        let report =
            evaluate_abstract_level(&gold(), &[p.clone()], &corpus(), CapPolicy::Truncate(3))
                .unwrap();
        assert_eq!(report.num, 1);

        // Drop 7's score below 9's: top 3 = {2, 5, 9}, rationale {2,5} still inside.
        p.entries.get_mut(&11).unwrap().scores =
            Some([(2, 0.9), (5, 0.8), (7, 0.05), (9, 0.1)].into_iter().collect());
        let report =
            evaluate_abstract_level(&gold(), &[p.clone()], &corpus(), CapPolicy::Truncate(3))
                .unwrap();
        assert_eq!(report.num, 1);

        p.entries.get_mut(&11).unwrap().scores = None;
        assert!(
            evaluate_abstract_level(&gold(), &[p], &corpus(), CapPolicy::Truncate(3)).is_err()
        );
    }

    #[test]
    fn sentence_level_mixed_selection() {
        // S* = {2, 5}; P = 2/3, R = 2/3 (denominator |{2,5}| + |{7}| = 3).
        let report = evaluate_sentence_level(
            &gold(),
            &pred(&[(11, Label::Supports, &[2, 5, 9])]),
            &corpus(),
        )
        .unwrap();
        assert_eq!((report.num, report.precision_den, report.recall_den), (2, 3, 3));
        assert_eq!(report.precision, 2.0 / 3.0);
        assert_eq!(report.recall, 2.0 / 3.0);
        assert_eq!(report.f1, 2.0 / 3.0);
    }

    #[test]
    fn sentence_level_single_full_rationale() {
        // S* = {7}; P = 1, R = 1/3.
        let report = evaluate_sentence_level(
            &gold(),
            &pred(&[(11, Label::Supports, &[7])]),
            &corpus(),
        )
        .unwrap();
        assert_eq!((report.num, report.precision_den, report.recall_den), (1, 1, 3));
        assert_eq!(report.precision, 1.0);
        assert_eq!(report.recall, 1.0 / 3.0);
    }

    #[test]
    fn sentence_level_wrong_label_zeroes_numerator() {
        let report = evaluate_sentence_level(
            &gold(),
            &pred(&[(11, Label::Refutes, &[2, 5, 9])]),
            &corpus(),
        )
        .unwrap();
        assert_eq!((report.num, report.precision_den), (0, 3));
        assert_eq!(report.precision, 0.0);
    }

    #[test]
    fn gold_identity_scores_perfectly() {
        // Predictions = gold rationale unions with gold labels.
        let gold = gold();
        let preds = pred(&[(11, Label::Supports, &[2, 5, 7])]);
        let abs = evaluate_abstract_level(&gold, &preds, &corpus(), CapPolicy::Off).unwrap();
        let sent = evaluate_sentence_level(&gold, &preds, &corpus()).unwrap();
        for report in [abs, sent] {
            assert_eq!(report.precision, 1.0);
            assert_eq!(report.recall, 1.0);
            assert_eq!(report.f1, 1.0);
        }
    }

    #[test]
    fn diagnostic_selection_counts_membership() {
        let gold = gold(); // union {2, 5, 7}
        let outputs = vec![SelectorOutput {
            claim_id: 1,
            doc_id: 11,
            selected: [5, 9].into(),
        }];
        let report = diagnostic_selection_prf(&gold, &outputs);
        assert_eq!((report.num, report.precision_den, report.recall_den), (1, 2, 3));
        assert_eq!(report.precision, 0.5);
        assert_eq!(report.recall, 1.0 / 3.0);
    }

    #[test]
    fn diagnostic_selection_empty_everywhere() {
        let gold = gold();
        let outputs = vec![SelectorOutput {
            claim_id: 1,
            doc_id: 11,
            selected: SentenceSet::new(),
        }];
        let report = diagnostic_selection_prf(&gold, &outputs);
        assert_eq!((report.num, report.precision_den), (0, 0));
        assert_eq!(report.precision, 0.0);
        assert_eq!(report.recall, 0.0);
        assert_eq!(report.f1, 0.0);
    }

    #[test]
    fn diagnostic_selection_exact_match() {
        let gold = gold();
        let outputs = vec![SelectorOutput {
            claim_id: 1,
            doc_id: 11,
            selected: [2, 5, 7].into(),
        }];
        let report = diagnostic_selection_prf(&gold, &outputs);
        assert_eq!(report.precision, 1.0);
        assert_eq!(report.recall, 1.0);
    }

    #[test]
    fn label_diagnostics_accuracy_and_confusion() {
        let gold = gold();
        let outputs = vec![
            LabelerOutput {
                claim_id: 1,
                doc_id: 11,
                predicted: Label::Supports,
            },
            // Cited but not evidence: gold label NEI.
            LabelerOutput {
                claim_id: 1,
                doc_id: 12,
                predicted: Label::Supports,
            },
        ];
        let diag = diagnostic_label_accuracy(&gold, &outputs);
        assert_eq!(diag.total, 2);
        assert_eq!(diag.accuracy, 0.5);
        assert_eq!(diag.confusion[0][0], 1); // gold S, predicted S
        assert_eq!(diag.confusion[2][0], 1); // gold NEI, predicted S
        // Per-label F1: SUPPORTS 2/3, others 0.
        assert!((diag.macro_f1 - 2.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn label_diagnostics_oracle_labeler_is_perfect() {
        use crate::stages::{oracle_label, oracle_select};
        let gold = gold();
        // Oracle labeler fed the gold rationale union for each gold pair,
        // plus a cited non-evidence pair fed an empty selection.
        let mut outputs = Vec::new();
        for ev in &gold {
            for &doc_id in ev.entries.keys() {
                outputs.push(LabelerOutput {
                    claim_id: ev.claim_id,
                    doc_id,
                    predicted: oracle_label(ev, doc_id, &oracle_select(ev, doc_id)),
                });
            }
        }
        outputs.push(LabelerOutput {
            claim_id: 1,
            doc_id: 12,
            predicted: oracle_label(&gold[0], 12, &oracle_select(&gold[0], 12)),
        });
        let diag = diagnostic_label_accuracy(&gold, &outputs);
        assert_eq!(diag.accuracy, 1.0);
    }

    #[test]
    fn label_diagnostics_fixed_labeler_counts_majority() {
        // 1 SUPPORTS pair out of 3 cited pairs: always-SUPPORTS scores 1/3.
        let gold = gold();
        let outputs: Vec<LabelerOutput> = [11, 12, 13]
            .into_iter()
            .map(|doc_id| LabelerOutput {
                claim_id: 1,
                doc_id,
                predicted: Label::Supports,
            })
            .collect();
        let diag = diagnostic_label_accuracy(&gold, &outputs);
        assert!((diag.accuracy - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn stats_on_tiny_dataset() {
        // One claim with a 4-sentence abstract and one 2-sentence rationale.
        let corpus =
            Corpus::from_documents([AbstractDoc::new(
                13,
                "t",
                (0..4).map(|i| format!("s{i}")).collect(),
                true,
            )
            .unwrap()])
            .unwrap();
        let claims = vec![Claim {
            id: 1,
            text: "c".into(),
            cited_doc_ids: vec![13],
        }];
        let mut ev = GoldEvidence::new(1);
        ev.entries.insert(
            13,
            GoldEntry {
                label: Label::Supports,
                rationales: vec![[0, 1].into()],
            },
        );
        let report = dataset_stats(&corpus, &claims, &[ev]).unwrap();
        let structured = &report.by_structure[1];
        assert_eq!(structured.evidence_abstracts, 1);
        assert_eq!(structured.rationale_fraction_median, Some(0.5));
        assert_eq!(structured.abstract_length_median, Some(4.0));
        assert_eq!(report.evidence_docs_per_claim, [(1, 1)].into_iter().collect());
        assert_eq!(report.claim_labels[&Label::Supports], 1);
    }

    #[test]
    fn percent_renders_one_decimal() {
        assert_eq!(percent(1.0), "100.0");
        assert_eq!(percent(0.685), "68.5");
        assert_eq!(percent(2.0 / 3.0), "66.7");
        assert_eq!(percent(0.0), "0.0");
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn shuffle<T: Clone>(items: &[T], seed: u64) -> Vec<T> {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut v = items.to_vec();
            v.shuffle(&mut rng);
            v
        }

        proptest! {
            /// Adding a sentence outside every gold rationale never raises
            /// sentence-level precision and never breaks abstract-level
            /// correctness under cap-off.
            #[test]
            fn extra_noise_sentence_is_never_helpful(extra in 8usize..10) {
                let gold = gold();
                let base = pred(&[(11, Label::Supports, &[2, 5, 7])]);
                let noisy = pred(&[(11, Label::Supports, &[2, 5, 7, extra])]);
                let corpus = corpus();

                let p_base = evaluate_sentence_level(&gold, &base, &corpus).unwrap().precision;
                let p_noisy = evaluate_sentence_level(&gold, &noisy, &corpus).unwrap().precision;
                prop_assert!(p_noisy <= p_base);

                let a_base = evaluate_abstract_level(&gold, &base, &corpus, CapPolicy::Off).unwrap();
                let a_noisy = evaluate_abstract_level(&gold, &noisy, &corpus, CapPolicy::Off).unwrap();
                prop_assert_eq!(a_base.num, a_noisy.num);
            }

            /// Reports are invariant to the ordering of claims in either input.
            #[test]
            fn order_invariance(seed in 0u64..500) {
                let corpus = corpus();
                let mut gold = gold();
                let mut ev2 = GoldEvidence::new(2);
                ev2.entries.insert(12, GoldEntry {
                    label: Label::Refutes,
                    rationales: vec![[1].into()],
                });
                gold.push(ev2);

                let mut preds = pred(&[(11, Label::Supports, &[2, 5])]);
                let mut p2 = Prediction::new(2);
                p2.entries.insert(12, PredictedEntry::new(Label::Refutes, [1, 3]));
                preds.push(p2);

                let gold_shuffled = shuffle(&gold, seed);
                let preds_shuffled = shuffle(&preds, seed.wrapping_add(1));

                let a = evaluate_abstract_level(&gold, &preds, &corpus, CapPolicy::default()).unwrap();
                let b = evaluate_abstract_level(&gold_shuffled, &preds_shuffled, &corpus, CapPolicy::default()).unwrap();
                prop_assert_eq!(a, b);

                let s = evaluate_sentence_level(&gold, &preds, &corpus).unwrap();
                let t = evaluate_sentence_level(&gold_shuffled, &preds_shuffled, &corpus).unwrap();
                prop_assert_eq!(s, t);
            }
        }
    }
}
