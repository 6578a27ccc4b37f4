//! Retrieval-corpus construction from a citation graph: seed abstracts,
//! co-cited abstracts, and per-citance distractor sampling.
//!
//! Distractors for a citance are sampled from documents cited elsewhere in
//! the same citing document but not in the citance's paragraph. Sampling is
//! uniform without replacement over doc-id-sorted candidates, driven by a
//! generator keyed on (seed, citance id), so parallel and serial runs are
//! byte-identical.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::Value;

use crate::data::{Corpus, DocId};
use crate::error::{Error, Result};

pub const DEFAULT_DISTRACTORS: usize = 5;

// ---------------------------------------------------------------------------
// Graph types
// ---------------------------------------------------------------------------

/// One citation sentence: where it lives and what it cites.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Citance {
    pub citance_id: u64,
    pub citing_doc_id: DocId,
    pub paragraph_id: u64,
    /// Duplicate-free.
    pub cited_doc_ids: Vec<DocId>,
}

/// A set of citances plus the universe of abstracts available to build
/// corpora from.
#[derive(Debug, Clone)]
pub struct CitationGraph {
    citances: Vec<Citance>,
    available_abstracts: BTreeSet<DocId>,
    /// citing_doc_id -> indices into `citances`.
    by_citing_doc: HashMap<DocId, Vec<usize>>,
}

impl CitationGraph {
    pub fn new(citances: Vec<Citance>, available_abstracts: BTreeSet<DocId>) -> CitationGraph {
        let mut by_citing_doc: HashMap<DocId, Vec<usize>> = HashMap::new();
        for (i, citance) in citances.iter().enumerate() {
            by_citing_doc.entry(citance.citing_doc_id).or_default().push(i);
        }
        CitationGraph {
            citances,
            available_abstracts,
            by_citing_doc,
        }
    }

    pub fn citances(&self) -> &[Citance] {
        &self.citances
    }

    pub fn available_abstracts(&self) -> &BTreeSet<DocId> {
        &self.available_abstracts
    }

    /// Cited documents with no available abstract; flagged, not fatal.
    pub fn missing_abstracts(&self) -> BTreeSet<DocId> {
        self.citances
            .iter()
            .flat_map(|c| c.cited_doc_ids.iter())
            .filter(|d| !self.available_abstracts.contains(d))
            .copied()
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Distractor sampling
// ---------------------------------------------------------------------------

fn keyed_rng(seed: u64, citance_id: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&citance_id.to_le_bytes());
    key[16..24].copy_from_slice(b"distract");
    ChaCha8Rng::from_seed(key)
}

/// Samples up to `n` distractors for one citance: documents cited anywhere
/// in the same citing document, excluding every document cited in the
/// citance's paragraph. Short-samples when candidates are scarce. The same
/// (graph, citance, n, seed) always yields the same list.
pub fn sample_distractors(
    graph: &CitationGraph,
    citance: &Citance,
    n: usize,
    seed: u64,
) -> Vec<DocId> {
    let siblings = graph
        .by_citing_doc
        .get(&citance.citing_doc_id)
        .map(Vec::as_slice)
        .unwrap_or(&[]);

    let mut excluded: BTreeSet<DocId> = citance.cited_doc_ids.iter().copied().collect();
    let mut pool: BTreeSet<DocId> = BTreeSet::new();
    for &i in siblings {
        let sibling = &graph.citances[i];
        if sibling.paragraph_id == citance.paragraph_id {
            excluded.extend(sibling.cited_doc_ids.iter().copied());
        } else {
            pool.extend(sibling.cited_doc_ids.iter().copied());
        }
    }

    // Candidates sorted by doc id; partial Fisher-Yates draws min(n, len)
    // of them uniformly without replacement.
    let mut candidates: Vec<DocId> = pool.difference(&excluded).copied().collect();
    let take = n.min(candidates.len());
    let mut rng = keyed_rng(seed, citance.citance_id);
    for i in 0..take {
        let j = rng.gen_range(i..candidates.len());
        candidates.swap(i, j);
    }
    candidates.truncate(take);
    candidates
}

// ---------------------------------------------------------------------------
// Corpus assembly
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Role {
    Seed,
    Cited,
    Distractor,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::Seed => "seed",
            Role::Cited => "cited",
            Role::Distractor => "distractor",
        }
    }
}

/// Provenance of one corpus document: every role it plays and the citances
/// that brought it in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub doc_id: DocId,
    pub roles: BTreeSet<Role>,
    pub citance_ids: BTreeSet<u64>,
}

/// Builds a retrieval corpus: the seed documents, the documents cited by
/// seed-citing (source) citances, and per-source-citance distractors.
/// Citances that cite no seed document contribute candidate structure for
/// sampling but no corpus members of their own.
pub fn assemble_corpus(
    graph: &CitationGraph,
    seed_doc_ids: &[DocId],
    abstracts: &Corpus,
    n_distractors: usize,
    seed: u64,
) -> Result<(Corpus, Vec<ManifestEntry>)> {
    let seeds: BTreeSet<DocId> = seed_doc_ids.iter().copied().collect();

    let source_citances: Vec<&Citance> = graph
        .citances
        .iter()
        .filter(|c| c.cited_doc_ids.iter().any(|d| seeds.contains(d)))
        .collect();

    let sampled: Vec<(u64, Vec<DocId>, Vec<DocId>)> = source_citances
        .par_iter()
        .map(|citance| {
            (
                citance.citance_id,
                citance.cited_doc_ids.clone(),
                sample_distractors(graph, citance, n_distractors, seed),
            )
        })
        .collect();

    let mut manifest: BTreeMap<DocId, ManifestEntry> = BTreeMap::new();
    let mut touch = |doc_id: DocId, role: Role, citance: Option<u64>| {
        let entry = manifest.entry(doc_id).or_insert_with(|| ManifestEntry {
            doc_id,
            roles: BTreeSet::new(),
            citance_ids: BTreeSet::new(),
        });
        entry.roles.insert(role);
        if let Some(id) = citance {
            entry.citance_ids.insert(id);
        }
    };

    for &doc_id in &seeds {
        touch(doc_id, Role::Seed, None);
    }
    for (citance_id, cited, distractors) in &sampled {
        for &doc_id in cited {
            touch(doc_id, Role::Cited, Some(*citance_id));
        }
        for &doc_id in distractors {
            touch(doc_id, Role::Distractor, Some(*citance_id));
        }
    }

    let missing: Vec<DocId> = manifest
        .keys()
        .filter(|d| abstracts.get(**d).is_none())
        .copied()
        .collect();
    if !missing.is_empty() {
        return Err(Error::invalid(format!(
            "no abstract available for selected documents: {missing:?}"
        )));
    }

    let corpus = Corpus::from_documents(
        manifest
            .keys()
            .map(|&doc_id| abstracts.get(doc_id).unwrap().clone()),
    )?;
    Ok((corpus, manifest.into_values().collect()))
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

/// Loads a citation graph file: one citance per line,
/// `{"citance_id", "citing_doc_id", "paragraph_id", "cited_doc_ids"}`.
pub fn load_citances(path: &Path) -> Result<Vec<Citance>> {
    let mut citances = Vec::new();
    let mut seen: BTreeMap<u64, usize> = BTreeMap::new();
    crate::io::for_each_line(path, |line_no, obj| {
        let mut f = crate::io::Fields::new(
            path,
            line_no,
            obj,
            &["citance_id", "citing_doc_id", "paragraph_id", "cited_doc_ids"],
        );
        let citance_id = f.require_u64("citance_id")?;
        if let Some(&prev) = seen.get(&citance_id) {
            return Err(f.err(format!(
                "duplicate citance_id {citance_id} (first seen on line {prev})"
            )));
        }
        seen.insert(citance_id, line_no);
        let citing_doc_id = f.require_u64("citing_doc_id")?;
        let paragraph_id = f.require_u64("paragraph_id")?;
        let raw = f.require_array("cited_doc_ids")?;
        if raw.is_empty() {
            return Err(f.err("cited_doc_ids must be non-empty"));
        }
        let mut cited_doc_ids = Vec::with_capacity(raw.len());
        let mut unique = BTreeSet::new();
        for v in &raw {
            let doc_id = f.u64_value("cited_doc_ids", v)?;
            if !unique.insert(doc_id) {
                return Err(f.err(format!("cited_doc_ids repeats doc {doc_id}")));
            }
            cited_doc_ids.push(doc_id);
        }
        citances.push(Citance {
            citance_id,
            citing_doc_id,
            paragraph_id,
            cited_doc_ids,
        });
        Ok(())
    })?;
    Ok(citances)
}

/// Loads a seed-document list: one doc id per line, blanks ignored.
pub fn load_seed_ids(path: &Path) -> Result<Vec<DocId>> {
    let reader = crate::io::open_reader(path)?;
    let mut ids = Vec::new();
    for (idx, line) in std::io::BufRead::lines(reader).enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let id: DocId = trimmed.parse().map_err(|_| {
            Error::parse(path, idx + 1, format!("expected a document id, got {trimmed:?}"))
        })?;
        ids.push(id);
    }
    Ok(ids)
}

/// Writes the provenance manifest: one JSON object per corpus document.
pub fn write_manifest(entries: &[ManifestEntry], path: &Path) -> Result<()> {
    let mut out = crate::io::open_writer(path)?;
    for entry in entries {
        let roles: Vec<&str> = entry.roles.iter().map(Role::as_str).collect();
        let citances: Vec<u64> = entry.citance_ids.iter().copied().collect();
        let line: Value = serde_json::json!({
            "doc_id": entry.doc_id,
            "roles": roles,
            "citance_ids": citances,
        });
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::AbstractDoc;

    fn citance(id: u64, citing: DocId, paragraph: u64, cited: &[DocId]) -> Citance {
        Citance {
            citance_id: id,
            citing_doc_id: citing,
            paragraph_id: paragraph,
            cited_doc_ids: cited.to_vec(),
        }
    }

    fn abstracts(ids: impl IntoIterator<Item = DocId>) -> Corpus {
        Corpus::from_documents(ids.into_iter().map(|id| {
            AbstractDoc::new(id, format!("t{id}"), vec![format!("s{id}")], false).unwrap()
        }))
        .unwrap()
    }

    /// Citing doc 1 cites {A=100, E=101} in paragraph 3 (the citance's own
    /// paragraph) and {B=200, C=201} in paragraphs 1 and 2.
    fn spec_example_graph() -> CitationGraph {
        let citances = vec![
            citance(10, 1, 3, &[100, 101]),
            citance(11, 1, 1, &[200]),
            citance(12, 1, 2, &[201]),
        ];
        CitationGraph::new(citances, [100, 101, 200, 201].into_iter().collect())
    }

    #[test]
    fn exclusion_forces_candidate_set() {
        let graph = spec_example_graph();
        let sampled = sample_distractors(&graph, &graph.citances()[0], 5, 7);
        let as_set: BTreeSet<DocId> = sampled.iter().copied().collect();
        assert_eq!(as_set, [200, 201].into_iter().collect());
    }

    #[test]
    fn no_other_paragraphs_means_no_distractors() {
        let citances = vec![citance(1, 1, 0, &[100])];
        let graph = CitationGraph::new(citances, [100].into_iter().collect());
        assert!(sample_distractors(&graph, &graph.citances()[0], 5, 0).is_empty());
    }

    #[test]
    fn same_seed_same_output() {
        let graph = spec_example_graph();
        let a = sample_distractors(&graph, &graph.citances()[0], 1, 42);
        let b = sample_distractors(&graph, &graph.citances()[0], 1, 42);
        assert_eq!(a, b);
        assert_eq!(a.len(), 1);
    }

    #[test]
    fn degenerate_graph_keeps_seed_only() {
        let citances = vec![citance(1, 50, 0, &[100])];
        let graph = CitationGraph::new(citances, [100].into_iter().collect());
        let (corpus, manifest) =
            assemble_corpus(&graph, &[100], &abstracts([100]), 5, 0).unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(manifest.len(), 1);
        assert_eq!(
            manifest[0].roles,
            [Role::Seed, Role::Cited].into_iter().collect()
        );
        assert_eq!(manifest[0].citance_ids, [1].into_iter().collect());
    }

    #[test]
    fn cocited_and_distractor_roles_merge() {
        // Doc 300 is co-cited by source citance 1 and a distractor
        // candidate for source citance 2 (different citing doc paragraphs).
        let citances = vec![
            citance(1, 7, 0, &[100, 300]),
            citance(2, 7, 1, &[101]),
        ];
        let graph = CitationGraph::new(citances, [100, 101, 300].into_iter().collect());
        let (corpus, manifest) =
            assemble_corpus(&graph, &[100, 101], &abstracts([100, 101, 300]), 5, 3).unwrap();
        assert_eq!(corpus.len(), 3);
        let entry = manifest.iter().find(|m| m.doc_id == 300).unwrap();
        assert_eq!(
            entry.roles,
            [Role::Cited, Role::Distractor].into_iter().collect()
        );
        assert_eq!(entry.citance_ids, [1, 2].into_iter().collect());
    }

    #[test]
    fn disjoint_pools_add_exactly_n_distractors_each() {
        // 10 source citances, each with a disjoint 5-document pool in
        // another paragraph of its own citing doc.
        let mut citances = Vec::new();
        let mut available: BTreeSet<DocId> = BTreeSet::new();
        let mut seeds = Vec::new();
        for i in 0..10u64 {
            let seed_doc = 1000 + i;
            seeds.push(seed_doc);
            available.insert(seed_doc);
            let pool: Vec<DocId> = (0..5).map(|j| 2000 + i * 5 + j).collect();
            available.extend(pool.iter().copied());
            citances.push(citance(i, i, 0, &[seed_doc]));
            citances.push(citance(100 + i, i, 1, &pool));
        }
        let graph = CitationGraph::new(citances, available.clone());
        let (corpus, manifest) =
            assemble_corpus(&graph, &seeds, &abstracts(available), 5, 9).unwrap();
        assert_eq!(corpus.len(), 60);
        let distractor_docs = manifest
            .iter()
            .filter(|m| m.roles.contains(&Role::Distractor))
            .count();
        assert_eq!(distractor_docs, 50);
    }

    #[test]
    fn missing_abstract_lists_ids() {
        let citances = vec![citance(1, 7, 0, &[100])];
        let graph = CitationGraph::new(citances, [100].into_iter().collect());
        let err = assemble_corpus(&graph, &[100], &abstracts([]), 5, 0).unwrap_err();
        assert!(err.to_string().contains("100"));
    }

    #[test]
    fn missing_abstracts_flagged_on_graph() {
        let citances = vec![citance(1, 7, 0, &[100, 999])];
        let graph = CitationGraph::new(citances, [100].into_iter().collect());
        assert_eq!(graph.missing_abstracts(), [999].into_iter().collect());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arbitrary_graph() -> impl Strategy<Value = CitationGraph> {
            // Up to 4 citing docs, 6 citances, 3 paragraphs, 12 documents.
            proptest::collection::vec(
                (
                    0u64..4,
                    0u64..3,
                    proptest::collection::btree_set(0u64..12, 1..5),
                ),
                1..7,
            )
            .prop_map(|raw| {
                let citances: Vec<Citance> = raw
                    .into_iter()
                    .enumerate()
                    .map(|(i, (citing, paragraph, cited))| Citance {
                        citance_id: i as u64,
                        citing_doc_id: citing,
                        paragraph_id: paragraph,
                        cited_doc_ids: cited.into_iter().collect(),
                    })
                    .collect();
                CitationGraph::new(citances, (0..12).collect())
            })
        }

        proptest! {
            /// No sampled distractor is cited in the citance's paragraph,
            /// and the sample size is exactly min(n, |candidates|).
            #[test]
            fn distractor_invariants(graph in arbitrary_graph(), n in 0usize..8, seed in 0u64..100) {
                for citance in graph.citances() {
                    let sampled = sample_distractors(&graph, citance, n, seed);

                    let paragraph_cited: BTreeSet<DocId> = graph
                        .citances()
                        .iter()
                        .filter(|c| {
                            c.citing_doc_id == citance.citing_doc_id
                                && c.paragraph_id == citance.paragraph_id
                        })
                        .flat_map(|c| c.cited_doc_ids.iter().copied())
                        .collect();
                    for doc in &sampled {
                        prop_assert!(!paragraph_cited.contains(doc));
                    }

                    let candidates: BTreeSet<DocId> = graph
                        .citances()
                        .iter()
                        .filter(|c| {
                            c.citing_doc_id == citance.citing_doc_id
                                && c.paragraph_id != citance.paragraph_id
                        })
                        .flat_map(|c| c.cited_doc_ids.iter().copied())
                        .filter(|d| !paragraph_cited.contains(d))
                        .collect();
                    prop_assert_eq!(sampled.len(), n.min(candidates.len()));

                    let unique: BTreeSet<DocId> = sampled.iter().copied().collect();
                    prop_assert_eq!(unique.len(), sampled.len());

                    prop_assert_eq!(&sampled, &sample_distractors(&graph, citance, n, seed));
                }
            }
        }
    }
}
