//! Brute-force reference evaluators, written before and kept independent of
//! the production metrics module. Everything here is plain nested loops over
//! every (claim, abstract, sentence, rationale) tuple; no shared code with
//! the implementation under test.

use claimver::data::{GoldEvidence, Prediction};

pub struct BruteCounts {
    pub num: u64,
    pub precision_den: u64,
    pub recall_den: u64,
}

#[derive(Clone, Copy)]
pub enum BruteCap {
    Strict(usize),
    Truncate(usize),
    Off,
}

fn gold_entry(
    gold: &[GoldEvidence],
    claim_id: u64,
    doc_id: u64,
) -> Option<&claimver::data::GoldEntry> {
    for ev in gold {
        if ev.claim_id == claim_id {
            for (d, entry) in &ev.entries {
                if *d == doc_id {
                    return Some(entry);
                }
            }
        }
    }
    None
}

/// The sentence set actually evaluated for one predicted entry, after the
/// cap policy. Returns None when the entry is disqualified outright
/// (strict mode, over cap).
fn effective_sentences(
    entry: &claimver::data::PredictedEntry,
    cap: BruteCap,
) -> Option<Vec<usize>> {
    let sentences: Vec<usize> = entry.sentences.iter().copied().collect();
    match cap {
        BruteCap::Off => Some(sentences),
        BruteCap::Strict(limit) => {
            if sentences.len() > limit {
                None
            } else {
                Some(sentences)
            }
        }
        BruteCap::Truncate(limit) => {
            if sentences.len() <= limit {
                return Some(sentences);
            }
            let scores = entry
                .scores
                .as_ref()
                .expect("truncate cap requires scores; generator guarantees them in capped runs");
            // Highest score first, ties by ascending index.
            let mut order = sentences;
            order.sort_by(|&a, &b| {
                scores[&b]
                    .partial_cmp(&scores[&a])
                    .unwrap()
                    .then(a.cmp(&b))
            });
            order.truncate(limit);
            Some(order)
        }
    }
}

/// Abstract-level evaluation by direct enumeration of the definition:
/// an entry counts iff it names a gold evidence abstract, the label matches,
/// and some full gold rationale is inside the (capped) predicted set.
pub fn abstract_level(gold: &[GoldEvidence], preds: &[Prediction], cap: BruteCap) -> BruteCounts {
    let mut predicted = 0u64;
    let mut correct = 0u64;
    for pred in preds {
        for (doc_id, entry) in &pred.entries {
            predicted += 1;
            let Some(g) = gold_entry(gold, pred.claim_id, *doc_id) else {
                continue;
            };
            if g.label != entry.label {
                continue;
            }
            let Some(effective) = effective_sentences(entry, cap) else {
                continue;
            };
            let mut contains_full_rationale = false;
            for rationale in &g.rationales {
                let mut all_in = true;
                for s in rationale {
                    let mut found = false;
                    for e in &effective {
                        if e == s {
                            found = true;
                        }
                    }
                    if !found {
                        all_in = false;
                    }
                }
                if all_in && !rationale.is_empty() {
                    contains_full_rationale = true;
                }
            }
            if contains_full_rationale {
                correct += 1;
            }
        }
    }
    let mut gold_total = 0u64;
    for ev in gold {
        gold_total += ev.entries.len() as u64;
    }
    BruteCounts {
        num: correct,
        precision_den: predicted,
        recall_den: gold_total,
    }
}

/// Sentence-level evaluation by direct enumeration: a predicted sentence
/// counts iff the abstract is a correctly labeled gold evidence abstract,
/// the sentence belongs to some gold rationale, and every other member of
/// that rationale was also predicted. No cap applies.
pub fn sentence_level(gold: &[GoldEvidence], preds: &[Prediction]) -> BruteCounts {
    let mut predicted_sentences = 0u64;
    let mut correct_sentences = 0u64;
    for pred in preds {
        for (doc_id, entry) in &pred.entries {
            predicted_sentences += entry.sentences.len() as u64;
            let Some(g) = gold_entry(gold, pred.claim_id, *doc_id) else {
                continue;
            };
            if g.label != entry.label {
                continue;
            }
            for s_hat in &entry.sentences {
                let mut counts = false;
                for rationale in &g.rationales {
                    if !rationale.contains(s_hat) {
                        continue;
                    }
                    let mut others_covered = true;
                    for member in rationale {
                        if !entry.sentences.contains(member) {
                            others_covered = false;
                        }
                    }
                    if others_covered {
                        counts = true;
                    }
                }
                if counts {
                    correct_sentences += 1;
                }
            }
        }
    }
    let mut gold_sentences = 0u64;
    for ev in gold {
        for entry in ev.entries.values() {
            for rationale in &entry.rationales {
                gold_sentences += rationale.len() as u64;
            }
        }
    }
    BruteCounts {
        num: correct_sentences,
        precision_den: predicted_sentences,
        recall_den: gold_sentences,
    }
}
