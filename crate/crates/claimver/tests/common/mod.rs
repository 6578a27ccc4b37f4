//! Shared test support: the brute-force reference evaluators, small
//! dataset generators, and CLI fixtures used by the acceptance suite.
#![allow(dead_code)]

pub mod brute;

use std::collections::BTreeMap;

use claimver::data::{
    AbstractDoc, Claim, Corpus, GoldEntry, GoldEvidence, Label, PredictedEntry, Prediction,
};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// A self-contained random instance: corpus, claims, gold, predictions.
pub struct Instance {
    pub corpus: Corpus,
    pub claims: Vec<Claim>,
    pub gold: Vec<GoldEvidence>,
    pub preds: Vec<Prediction>,
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generates a small random instance: up to `max_claims` claims over up to
/// `max_docs` abstracts of up to `max_sentences` sentences, with random gold
/// rationales (disjoint by construction) and unconstrained predictions.
pub fn random_instance(
    rng: &mut ChaCha8Rng,
    max_claims: usize,
    max_docs: usize,
    max_sentences: usize,
) -> Instance {
    let n_docs = rng.gen_range(1..=max_docs);
    let docs: Vec<AbstractDoc> = (0..n_docs)
        .map(|i| {
            let n_sent = rng.gen_range(1..=max_sentences);
            AbstractDoc::new(
                100 + i as u64,
                format!("title {i}"),
                (0..n_sent).map(|s| format!("doc {i} sentence {s}")).collect(),
                rng.gen_bool(0.5),
            )
            .unwrap()
        })
        .collect();
    let doc_ids: Vec<u64> = docs.iter().map(|d| d.doc_id).collect();
    let corpus = Corpus::from_documents(docs).unwrap();

    let n_claims = rng.gen_range(1..=max_claims);
    let mut claims = Vec::new();
    let mut gold = Vec::new();
    let mut preds = Vec::new();

    for c in 0..n_claims {
        let claim_id = c as u64 + 1;
        let n_cited = rng.gen_range(0..=doc_ids.len());
        let mut cited = doc_ids.clone();
        cited.shuffle(rng);
        cited.truncate(n_cited);
        cited.sort_unstable();
        claims.push(Claim {
            id: claim_id,
            text: format!("claim {claim_id}"),
            cited_doc_ids: cited.clone(),
        });

        let mut ev = GoldEvidence::new(claim_id);
        for &doc_id in &cited {
            if !rng.gen_bool(0.6) {
                continue;
            }
            let doc_len = corpus.get(doc_id).unwrap().len();
            // Partition a random subset of sentences into 1..=3 disjoint rationales.
            let mut pool: Vec<usize> = (0..doc_len).collect();
            pool.shuffle(rng);
            let take = rng.gen_range(1..=doc_len.min(5));
            pool.truncate(take);
            let n_rat = rng.gen_range(1..=pool.len().min(3));
            let mut rationales = vec![std::collections::BTreeSet::new(); n_rat];
            for (i, s) in pool.into_iter().enumerate() {
                rationales[i % n_rat].insert(s);
            }
            ev.entries.insert(
                doc_id,
                GoldEntry {
                    label: if rng.gen_bool(0.7) { Label::Supports } else { Label::Refutes },
                    rationales,
                },
            );
        }
        if !ev.entries.is_empty() || rng.gen_bool(0.5) {
            gold.push(ev);
        }

        // Predictions are unconstrained: any doc, any label, any sentence set.
        let mut pred = Prediction::new(claim_id);
        for &doc_id in &doc_ids {
            if !rng.gen_bool(0.5) {
                continue;
            }
            let doc_len = corpus.get(doc_id).unwrap().len();
            let n_sel = rng.gen_range(0..=doc_len);
            let mut sel: Vec<usize> = (0..doc_len).collect();
            sel.shuffle(rng);
            sel.truncate(n_sel);
            let mut entry = PredictedEntry::new(
                if rng.gen_bool(0.7) { Label::Supports } else { Label::Refutes },
                sel.iter().copied(),
            );
            if rng.gen_bool(0.5) {
                let scores: BTreeMap<usize, f64> =
                    sel.iter().map(|&s| (s, rng.gen_range(0.0..1.0))).collect();
                entry = entry.with_scores(scores);
            }
            pred.entries.insert(doc_id, entry);
        }
        preds.push(pred);
    }

    Instance {
        corpus,
        claims,
        gold,
        preds,
    }
}

// ---------------------------------------------------------------------------
// CLI fixtures
// ---------------------------------------------------------------------------

use std::fmt::Write as _;
use std::path::PathBuf;

/// A small on-disk dataset: corpus, claims with gold evidence, a citation
/// graph, and a seed list, all in a temp directory.
pub struct CliFixture {
    pub dir: tempfile::TempDir,
    pub corpus: PathBuf,
    pub claims: PathBuf,
    pub graph: PathBuf,
    pub seeds: PathBuf,
}

pub fn cli_fixture() -> CliFixture {
    let dir = tempfile::tempdir().unwrap();

    let corpus = dir.path().join("corpus.jsonl");
    let docs = [
        (10, "aspirin cardiovascular prevention", vec![
            "aspirin reduces cardiovascular events in adults",
            "daily aspirin lowered event rates",
            "bleeding was a noted side effect",
        ]),
        (20, "influenza vaccination coverage", vec![
            "influenza vaccination prevents hospitalization",
            "coverage varies by region",
        ]),
        (30, "aspirin dosing schedules", vec![
            "optimal aspirin dosing remains debated",
            "low dose aspirin was common",
        ]),
        (40, "measles outbreak response", vec![
            "measles outbreaks follow vaccination gaps",
            "response teams contained the outbreak",
            "school exposure drove transmission",
        ]),
        (50, "zika virus transmission", vec![
            "zika transmission was mosquito borne",
        ]),
        (60, "statin therapy outcomes", vec![
            "statin therapy reduced cholesterol",
            "outcomes improved over five years",
        ]),
    ];
    let mut text = String::new();
    for (doc_id, title, sentences) in &docs {
        let line = serde_json::json!({
            "doc_id": doc_id,
            "title": title,
            "abstract": sentences,
            "structured": *doc_id % 20 == 0,
        });
        writeln!(text, "{line}").unwrap();
    }
    std::fs::write(&corpus, text).unwrap();

    let claims = dir.path().join("claims.jsonl");
    let mut text = String::new();
    for line in [
        serde_json::json!({
            "id": 1,
            "claim": "aspirin reduces cardiovascular events",
            "evidence": {"10": [{"sentences": [0], "label": "SUPPORT"}, {"sentences": [1], "label": "SUPPORT"}]},
            "cited_doc_ids": [10, 30],
        }),
        serde_json::json!({
            "id": 2,
            "claim": "measles outbreaks follow vaccination gaps",
            "evidence": {"40": [{"sentences": [0, 2], "label": "SUPPORT"}]},
            "cited_doc_ids": [40],
        }),
        serde_json::json!({
            "id": 3,
            "claim": "statin therapy raises cholesterol",
            "evidence": {"60": [{"sentences": [0], "label": "CONTRADICT"}]},
            "cited_doc_ids": [60],
        }),
        serde_json::json!({
            "id": 4,
            "claim": "zika spreads between people directly",
            "evidence": {},
            "cited_doc_ids": [50],
        }),
    ] {
        writeln!(text, "{line}").unwrap();
    }
    std::fs::write(&claims, text).unwrap();

    let graph = dir.path().join("graph.jsonl");
    let mut text = String::new();
    for line in [
        serde_json::json!({"citance_id": 1, "citing_doc_id": 100, "paragraph_id": 0, "cited_doc_ids": [10, 30]}),
        serde_json::json!({"citance_id": 2, "citing_doc_id": 100, "paragraph_id": 1, "cited_doc_ids": [20, 40]}),
        serde_json::json!({"citance_id": 3, "citing_doc_id": 100, "paragraph_id": 2, "cited_doc_ids": [50, 60]}),
        serde_json::json!({"citance_id": 4, "citing_doc_id": 200, "paragraph_id": 0, "cited_doc_ids": [40]}),
        serde_json::json!({"citance_id": 5, "citing_doc_id": 200, "paragraph_id": 3, "cited_doc_ids": [10, 50]}),
    ] {
        writeln!(text, "{line}").unwrap();
    }
    std::fs::write(&graph, text).unwrap();

    let seeds = dir.path().join("seeds.txt");
    std::fs::write(&seeds, "10\n40\n").unwrap();

    CliFixture {
        dir,
        corpus,
        claims,
        graph,
        seeds,
    }
}
